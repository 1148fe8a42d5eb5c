use std::fmt;
use std::ops::{BitXor, BitXorAssign};

use serde::{Deserialize, Serialize};

use super::field::Word16;

/// Byte permutation applied to the FSM register R1.
pub const SIGMA: [usize; 16] = [0, 4, 8, 12, 1, 5, 9, 13, 2, 6, 10, 14, 3, 7, 11, 15];

/// A 128-bit block; byte 0 is the least significant byte.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Block128(pub [u8; 16]);

impl Block128 {
    pub const ZERO: Block128 = Block128([0; 16]);

    pub fn splat(b: u8) -> Self {
        Block128([b; 16])
    }

    /// Assembles a block from eight 16-bit cells, lowest cell first.
    pub fn from_words(words: &[Word16; 8]) -> Self {
        let mut out = [0u8; 16];
        for (chunk, w) in out.chunks_exact_mut(2).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        Block128(out)
    }

    pub fn to_words(self) -> [Word16; 8] {
        let mut out = [0u16; 8];
        for (w, chunk) in out.iter_mut().zip(self.0.chunks_exact(2)) {
            *w = u16::from_le_bytes([chunk[0], chunk[1]]);
        }
        out
    }

    pub fn lanes(self) -> [u32; 4] {
        let mut out = [0u32; 4];
        for (lane, chunk) in out.iter_mut().zip(self.0.chunks_exact(4)) {
            *lane = u32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
        out
    }

    pub fn from_lanes(lanes: [u32; 4]) -> Self {
        let mut out = [0u8; 16];
        for (chunk, lane) in out.chunks_exact_mut(4).zip(lanes) {
            chunk.copy_from_slice(&lane.to_le_bytes());
        }
        Block128(out)
    }

    pub fn to_hex(self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; 16];
        hex::decode_to_slice(s.trim(), &mut out)?;
        Ok(Block128(out))
    }
}

impl BitXor for Block128 {
    type Output = Block128;

    fn bitxor(mut self, rhs: Block128) -> Block128 {
        self ^= rhs;
        self
    }
}

impl BitXorAssign for Block128 {
    fn bitxor_assign(&mut self, rhs: Block128) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a ^= b;
        }
    }
}

impl fmt::Debug for Block128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Block128({})", self.to_hex())
    }
}

impl From<Block128> for String {
    fn from(b: Block128) -> String {
        b.to_hex()
    }
}

impl TryFrom<String> for Block128 {
    type Error = hex::FromHexError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Block128::from_hex(&s)
    }
}

/// Output byte `i` is input byte `SIGMA[i]`.
pub fn sigma_permute(x: Block128) -> Block128 {
    let mut out = [0u8; 16];
    for (o, &s) in out.iter_mut().zip(SIGMA.iter()) {
        *o = x.0[s];
    }
    Block128(out)
}

/// Lane-wise addition modulo 2^32 of the four little-endian 32-bit lanes.
pub fn add32x4(x: Block128, y: Block128) -> Block128 {
    let (a, b) = (x.lanes(), y.lanes());
    Block128::from_lanes([
        a[0].wrapping_add(b[0]),
        a[1].wrapping_add(b[1]),
        a[2].wrapping_add(b[2]),
        a[3].wrapping_add(b[3]),
    ])
}
