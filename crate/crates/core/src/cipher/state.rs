use std::fmt;

use serde::{Deserialize, Serialize};

use super::block::Block128;
use super::field::Word16;
use super::fsm::{fsm_output, fsm_update, FsmState};
use super::lfsr::{lfsr_update, LfsrState};
use crate::error::CipherError;

/// Number of initialization rounds.
pub const INIT_ROUNDS: u8 = 16;

macro_rules! word_array {
    ($(#[$meta:meta])* $name:ident, $words:expr, $bytes:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(into = "String", try_from = "String")]
        pub struct $name {
            pub words: [Word16; $words],
        }

        impl $name {
            pub const BYTES: usize = $bytes;

            pub fn from_words(words: [Word16; $words]) -> Self {
                Self { words }
            }

            /// Byte `2i` is the low byte of word `i`.
            pub fn from_bytes(bytes: &[u8; $bytes]) -> Self {
                let mut words = [0u16; $words];
                for (w, c) in words.iter_mut().zip(bytes.chunks_exact(2)) {
                    *w = u16::from_le_bytes([c[0], c[1]]);
                }
                Self { words }
            }

            pub fn to_bytes(&self) -> [u8; $bytes] {
                let mut out = [0u8; $bytes];
                for (c, w) in out.chunks_exact_mut(2).zip(self.words) {
                    c.copy_from_slice(&w.to_le_bytes());
                }
                out
            }

            pub fn from_hex(s: &str) -> Result<Self, CipherError> {
                let s = s.trim();
                let mut bytes = [0u8; $bytes];
                hex::decode_to_slice(s, &mut bytes).map_err(|e| CipherError::Hex {
                    what: stringify!($name),
                    expected_digits: 2 * $bytes,
                    reason: e.to_string(),
                })?;
                Ok(Self::from_bytes(&bytes))
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.to_bytes())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl From<$name> for String {
            fn from(v: $name) -> String {
                v.to_hex()
            }
        }

        impl TryFrom<String> for $name {
            type Error = CipherError;

            fn try_from(s: String) -> Result<Self, Self::Error> {
                Self::from_hex(&s)
            }
        }
    };
}

word_array!(
    /// 256-bit key `(k_15, ..., k_0)`.
    Key256,
    16,
    32
);
word_array!(
    /// 128-bit IV `(iv_7, ..., iv_0)`.
    Iv128,
    8,
    16
);

impl Key256 {
    fn low_half(&self) -> Block128 {
        Block128::from_words(self.words[..8].try_into().unwrap())
    }

    fn high_half(&self) -> Block128 {
        Block128::from_words(self.words[8..].try_into().unwrap())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Uninitialized,
    /// Number of initialization rounds already executed.
    Initializing(u8),
    Keystream,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CipherState {
    pub lfsr: LfsrState,
    pub fsm: FsmState,
    pub phase: Phase,
}

impl Default for CipherState {
    fn default() -> Self {
        CipherState {
            lfsr: LfsrState::default(),
            fsm: FsmState::default(),
            phase: Phase::Uninitialized,
        }
    }
}

impl CipherState {
    /// Loads key and IV into the LFSRs, before any initialization round.
    pub fn load(key: &Key256, iv: &Iv128) -> Self {
        let mut lfsr = LfsrState::default();
        lfsr.a[..8].copy_from_slice(&iv.words);
        lfsr.a[8..].copy_from_slice(&key.words[..8]);
        lfsr.b[8..].copy_from_slice(&key.words[8..]);
        CipherState {
            lfsr,
            fsm: FsmState::default(),
            phase: Phase::Initializing(0),
        }
    }

    /// Current FSM output `z`, without touching the state.
    pub fn keystream_output(&self) -> Result<Block128, CipherError> {
        match self.phase {
            Phase::Uninitialized => Err(CipherError::WrongPhase {
                expected: "initializing or keystream",
                found: self.phase,
            }),
            _ => Ok(fsm_output(&self.fsm, Block128::from_words(&self.lfsr.t1()))),
        }
    }

    /// Runs one initialization round with the reference LFSR update.
    pub fn init_round(&mut self, key: &Key256) -> Result<(), CipherError> {
        self.init_round_with(key, lfsr_update)
    }

    /// Runs one initialization round, delegating the LFSR clocking to
    /// `step`. Protected implementations plug in here.
    pub fn init_round_with<F>(&mut self, key: &Key256, step: F) -> Result<(), CipherError>
    where
        F: FnOnce(&LfsrState) -> LfsrState,
    {
        let done = match self.phase {
            Phase::Initializing(r) => r,
            found => {
                return Err(CipherError::WrongPhase {
                    expected: "initializing",
                    found,
                })
            }
        };
        let z = self.clock(step);
        let high = Block128::from_words(&self.lfsr.a_high()) ^ z;
        self.lfsr.a[8..].copy_from_slice(&high.to_words());
        match done + 1 {
            15 => self.fsm.r1 ^= key.low_half(),
            16 => self.fsm.r1 ^= key.high_half(),
            _ => {}
        }
        self.phase = if done + 1 == INIT_ROUNDS {
            Phase::Keystream
        } else {
            Phase::Initializing(done + 1)
        };
        Ok(())
    }

    /// Emits the next keystream block.
    pub fn next_block(&mut self) -> Result<Block128, CipherError> {
        self.next_block_with(lfsr_update)
    }

    pub fn next_block_with<F>(&mut self, step: F) -> Result<Block128, CipherError>
    where
        F: FnOnce(&LfsrState) -> LfsrState,
    {
        if self.phase != Phase::Keystream {
            return Err(CipherError::WrongPhase {
                expected: "keystream",
                found: self.phase,
            });
        }
        Ok(self.clock(step))
    }

    /// Output, FSM update, LFSR update. Returns the output.
    fn clock<F>(&mut self, step: F) -> Block128
    where
        F: FnOnce(&LfsrState) -> LfsrState,
    {
        let z = fsm_output(&self.fsm, Block128::from_words(&self.lfsr.t1()));
        self.fsm = fsm_update(&self.fsm, Block128::from_words(&self.lfsr.t2()));
        self.lfsr = step(&self.lfsr);
        z
    }
}

/// Loads and runs all sixteen initialization rounds.
pub fn initialize(key: &Key256, iv: &Iv128) -> CipherState {
    let mut state = CipherState::load(key, iv);
    for _ in 0..INIT_ROUNDS {
        state.init_round(key).expect("state is initializing");
    }
    state
}

/// Keystream of `n` blocks.
pub fn keystream(key: &Key256, iv: &Iv128, n: usize) -> Vec<Block128> {
    let mut state = initialize(key, iv);
    (0..n)
        .map(|_| state.next_block().expect("state is in keystream phase"))
        .collect()
}

/// Encrypts or decrypts `message`.
pub fn xor_crypt(key: &Key256, iv: &Iv128, message: &[u8]) -> Vec<u8> {
    let mut state = initialize(key, iv);
    let mut out = Vec::with_capacity(message.len());
    for chunk in message.chunks(16) {
        let z = state.next_block().expect("state is in keystream phase");
        out.extend(chunk.iter().zip(z.0).map(|(m, k)| m ^ k));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loading_map() {
        let key = Key256::from_words(core::array::from_fn(|i| 0x1000 + i as u16));
        let iv = Iv128::from_words(core::array::from_fn(|i| 0x2000 + i as u16));
        let s = CipherState::load(&key, &iv);
        assert_eq!(s.lfsr.b[..8], [0; 8]);
        assert_eq!(s.lfsr.a[..8], iv.words);
        assert_eq!(s.lfsr.a[8..], key.words[..8]);
        assert_eq!(s.lfsr.b[8..], key.words[8..]);
        assert_eq!(s.phase, Phase::Initializing(0));
    }

    #[test]
    fn ivs_differing_in_iv0_differ_only_in_a0() {
        let key = Key256::from_words([0xBEEF; 16]);
        let mut iv = Iv128::from_words([0x1234; 8]);
        let s1 = CipherState::load(&key, &iv);
        iv.words[0] ^= 0x0100;
        let s2 = CipherState::load(&key, &iv);
        let diff = s1.lfsr ^ s2.lfsr;
        assert_eq!(diff.a[0], 0x0100);
        assert!(diff.a[1..].iter().chain(&diff.b).all(|&w| w == 0));
    }

    #[test]
    fn zero_vector() {
        let z = keystream(&Key256::default(), &Iv128::default(), 2);
        assert_eq!(z[0].to_hex(), "69ca6daf9ae3b72db134a85a837e419d");
        assert_eq!(z[1].to_hex(), "ec08aad39d7b0f009b60b28c534300ed");
    }

    #[test]
    fn output_requires_loaded_state() {
        assert!(matches!(
            CipherState::default().keystream_output(),
            Err(CipherError::WrongPhase { .. })
        ));
        let mut s = CipherState::load(&Key256::default(), &Iv128::default());
        assert!(s.keystream_output().is_ok());
        assert!(s.next_block().is_err());
        for _ in 0..16 {
            s.init_round(&Key256::default()).unwrap();
        }
        assert!(s.init_round(&Key256::default()).is_err());
        assert!(s.next_block().is_ok());
    }

    #[test]
    fn output_is_t1_when_r1_r2_zero() {
        let key = Key256::from_words(core::array::from_fn(|i| (i as u16) * 0x0101 + 7));
        let s = CipherState::load(&key, &Iv128::default());
        assert_eq!(
            s.keystream_output().unwrap(),
            Block128::from_words(&key.words[8..].try_into().unwrap())
        );
    }

    #[test]
    fn empty_message() {
        assert!(xor_crypt(&Key256::default(), &Iv128::default(), &[]).is_empty());
    }

    #[test]
    fn hex_lengths_checked() {
        assert!(Key256::from_hex(&"00".repeat(31)).is_err());
        assert!(Iv128::from_hex(&"0g".repeat(16)).is_err());
        let k = Key256::from_hex(&"ab".repeat(32)).unwrap();
        assert_eq!(k.words[0], 0xABAB);
    }

    proptest! {
        #[test]
        fn xor_crypt_involution(key in any::<[u8; 32]>(), iv in any::<[u8; 16]>(), msg in proptest::collection::vec(any::<u8>(), 0..80)) {
            let (k, v) = (Key256::from_bytes(&key), Iv128::from_bytes(&iv));
            prop_assert_eq!(xor_crypt(&k, &v, &xor_crypt(&k, &v, &msg)), msg);
        }
    }
}
