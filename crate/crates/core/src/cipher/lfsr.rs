use std::ops::BitXor;

use serde::{Deserialize, Serialize};

use super::field::{mul_x, mul_x_inv, Word16, ALPHA_INV, ALPHA_MUL, BETA_INV, BETA_MUL};

/// The two 16-cell LFSRs. `a[i]` is cell `a_i`, `b[i]` is cell `b_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LfsrState {
    pub a: [Word16; 16],
    pub b: [Word16; 16],
}

impl BitXor for LfsrState {
    type Output = LfsrState;

    fn bitxor(mut self, rhs: LfsrState) -> LfsrState {
        for i in 0..16 {
            self.a[i] ^= rhs.a[i];
            self.b[i] ^= rhs.b[i];
        }
        self
    }
}

impl LfsrState {
    /// Upper half of LFSR-A, `(a_15, ..., a_8)` as a block.
    pub fn a_high(&self) -> [Word16; 8] {
        self.a[8..].try_into().unwrap()
    }

    /// `T1 = (b_15, ..., b_8)`.
    pub fn t1(&self) -> [Word16; 8] {
        self.b[8..].try_into().unwrap()
    }

    /// `T2 = (a_7, ..., a_0)`.
    pub fn t2(&self) -> [Word16; 8] {
        self.a[..8].try_into().unwrap()
    }

    /// Shifts both registers down by eight cells and stores the freshly
    /// computed words in the upper halves.
    pub fn shifted_in(&self, u: &[Word16; 8], v: &[Word16; 8]) -> LfsrState {
        let mut next = LfsrState::default();
        next.a[..8].copy_from_slice(&self.a[8..]);
        next.b[..8].copy_from_slice(&self.b[8..]);
        next.a[8..].copy_from_slice(u);
        next.b[8..].copy_from_slice(v);
        next
    }
}

/// Intermediates of one `lfsr_update` call, in iteration order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LfsrTrace {
    pub u: [Word16; 8],
    pub v: [Word16; 8],
    /// LSB of `a_{i+8}`: whether `mul_x_inv` took its XOR branch for `u_i`.
    pub lsb_a: [bool; 8],
    /// LSB of `b_{i+8}` for `v_i`.
    pub lsb_b: [bool; 8],
}

/// `u_i` of sub-iteration `i`, expressed on the cells of the pre-update state.
#[inline]
pub fn feedback_u(s: &LfsrState, i: usize) -> Word16 {
    mul_x(s.a[i], ALPHA_MUL) ^ s.a[i + 1] ^ mul_x_inv(s.a[i + 8], ALPHA_INV) ^ s.b[i]
}

/// `v_i` of sub-iteration `i`, expressed on the cells of the pre-update state.
#[inline]
pub fn feedback_v(s: &LfsrState, i: usize) -> Word16 {
    mul_x(s.b[i], BETA_MUL) ^ s.b[i + 3] ^ mul_x_inv(s.b[i + 8], BETA_INV) ^ s.a[i]
}

/// Clocks both LFSRs eight times.
pub fn lfsr_update(state: &LfsrState) -> LfsrState {
    lfsr_update_traced(state).0
}

/// Like [`lfsr_update`], also returning every `u_i`/`v_i` it computed.
pub fn lfsr_update_traced(state: &LfsrState) -> (LfsrState, LfsrTrace) {
    let mut trace = LfsrTrace::default();
    for i in 0..8 {
        trace.u[i] = feedback_u(state, i);
        trace.v[i] = feedback_v(state, i);
        trace.lsb_a[i] = state.a[i + 8] & 1 != 0;
        trace.lsb_b[i] = state.b[i + 8] & 1 != 0;
    }
    (state.shifted_in(&trace.u, &trace.v), trace)
}
