//! Protected variants of the attacked LFSR operations. Each one is
//! functionally identical to the reference update.

mod constant_time;
mod masked;
mod shuffled;

use std::fmt;
use std::str::FromStr;

use rand::rngs::OsRng;
use rand::{RngCore, SeedableRng, TryRngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use constant_time::{
    ct_lfsr_update, mul_x_inv_ct, mul_x_inv_ct_ops, mul_x_inv_ops, CtTrace, Op, OpRecord,
};
pub use masked::{masked_lfsr_update, MaskedTrace, MaskedWord16};
pub use shuffled::{shuffled_lfsr_update, ShuffleOrder, ShuffledStep};

/// Implementation variant threaded through the simulator and the CLI.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Reference,
    ConstantTime,
    Masked,
    Shuffled,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Reference,
        Variant::ConstantTime,
        Variant::Masked,
        Variant::Shuffled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Reference => "reference",
            Variant::ConstantTime => "constant_time",
            Variant::Masked => "masked",
            Variant::Shuffled => "shuffled",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s || v.name().replace('_', "-") == s)
            .ok_or_else(|| {
                format!("unknown variant `{s}` (reference, constant_time, masked, shuffled)")
            })
    }
}

/// Source of fresh 16-bit masks and shuffle permutations.
#[allow(clippy::large_enum_variant)]
pub enum MaskSource {
    /// Reproducible stream for experiments.
    Seeded(ChaCha8Rng),
    /// Operating-system randomness.
    Os,
}

impl MaskSource {
    pub fn seeded(seed: u64) -> Self {
        MaskSource::Seeded(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_u32(&mut self) -> u32 {
        match self {
            MaskSource::Seeded(rng) => rng.next_u32(),
            MaskSource::Os => OsRng.try_next_u32().expect("operating-system RNG failed"),
        }
    }
}

impl Iterator for MaskSource {
    type Item = u16;

    fn next(&mut self) -> Option<u16> {
        Some(self.next_u32() as u16)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_parse() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!(
            "constant-time".parse::<Variant>().unwrap(),
            Variant::ConstantTime
        );
        assert!("bogus".parse::<Variant>().is_err());
    }

    #[test]
    fn seeded_masks_reproducible() {
        let a: Vec<u16> = MaskSource::seeded(9).take(16).collect();
        let b: Vec<u16> = MaskSource::seeded(9).take(16).collect();
        assert_eq!(a, b);
        assert_eq!(MaskSource::Os.take(4).count(), 4);
    }
}
