use serde::{Deserialize, Serialize};

use crate::cipher::{
    mul_x, mul_x_inv, LfsrState, Word16, ALPHA_INV, ALPHA_MUL, BETA_INV, BETA_MUL,
};
use crate::error::CountermeasureError;

/// First-order Boolean sharing: the value is `share1 ^ share2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MaskedWord16 {
    pub share1: Word16,
    pub share2: Word16,
}

impl MaskedWord16 {
    pub fn new(value: Word16, mask: Word16) -> Self {
        MaskedWord16 {
            share1: value ^ mask,
            share2: mask,
        }
    }

    /// Starts a sharing of zero under `mask`; public terms are then folded
    /// into the first share one at a time.
    fn zero(mask: Word16) -> Self {
        MaskedWord16 {
            share1: mask,
            share2: mask,
        }
    }

    fn fold(mut self, term: Word16) -> Self {
        self.share1 ^= term;
        self
    }

    pub fn value(self) -> Word16 {
        self.share1 ^ self.share2
    }
}

/// Shares observed during one masked LFSR update, in iteration order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MaskedTrace {
    pub u: [MaskedWord16; 8],
    pub v: [MaskedWord16; 8],
    pub masks: [Word16; 8],
    pub lsb_a: [bool; 8],
    pub lsb_b: [bool; 8],
}

/// LFSR update with `u_i` and `v_i` carried as two shares under one fresh
/// mask per sub-iteration. Shares are recombined only when written back
/// into the register.
pub fn masked_lfsr_update<I>(
    state: &LfsrState,
    masks: &mut I,
) -> Result<(LfsrState, MaskedTrace), CountermeasureError>
where
    I: Iterator<Item = Word16>,
{
    let s = state;
    let mut t = MaskedTrace::default();
    for i in 0..8 {
        let r = masks
            .next()
            .ok_or(CountermeasureError::RandomnessExhausted { consumed: i })?;
        t.masks[i] = r;
        t.u[i] = MaskedWord16::zero(r)
            .fold(mul_x(s.a[i], ALPHA_MUL))
            .fold(s.a[i + 1])
            .fold(mul_x_inv(s.a[i + 8], ALPHA_INV))
            .fold(s.b[i]);
        t.v[i] = MaskedWord16::zero(r)
            .fold(mul_x(s.b[i], BETA_MUL))
            .fold(s.b[i + 3])
            .fold(mul_x_inv(s.b[i + 8], BETA_INV))
            .fold(s.a[i]);
        t.lsb_a[i] = s.a[i + 8] & 1 != 0;
        t.lsb_b[i] = s.b[i + 8] & 1 != 0;
    }
    let u = t.u.map(MaskedWord16::value);
    let v = t.v.map(MaskedWord16::value);
    Ok((s.shifted_in(&u, &v), t))
}
