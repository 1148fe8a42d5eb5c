use crate::cipher::{
    feedback_v, mul_x, LfsrState, LfsrTrace, Word16, ALPHA_INV, ALPHA_MUL, BETA_INV, BETA_MUL,
};

/// Branch-free `mul_x_inv`: `(v >> 1) ^ (d & mask)` with `mask` all ones
/// iff the LSB of `v` is set.
#[inline]
pub fn mul_x_inv_ct(v: Word16, d: Word16) -> Word16 {
    let mask = 0u16.wrapping_sub(v & 1);
    (v >> 1) ^ (d & mask)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    And,
    Neg,
    Shift,
    Xor,
}

/// One executed operation and the value it produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OpRecord {
    pub op: Op,
    pub value: Word16,
}

/// Instrumented reference `mul_x_inv`: the XOR only shows up when the
/// branch is taken.
pub fn mul_x_inv_ops(v: Word16, d: Word16) -> (Word16, Vec<OpRecord>) {
    let shifted = v >> 1;
    let mut ops = vec![OpRecord {
        op: Op::Shift,
        value: shifted,
    }];
    if v & 1 != 0 {
        let out = shifted ^ d;
        ops.push(OpRecord {
            op: Op::Xor,
            value: out,
        });
        (out, ops)
    } else {
        (shifted, ops)
    }
}

/// Instrumented [`mul_x_inv_ct`]; the operation sequence never depends on `v`.
pub fn mul_x_inv_ct_ops(v: Word16, d: Word16) -> (Word16, Vec<OpRecord>) {
    let lsb = v & 1;
    let mask = 0u16.wrapping_sub(lsb);
    let folded = d & mask;
    let shifted = v >> 1;
    let out = shifted ^ folded;
    let ops = vec![
        OpRecord {
            op: Op::And,
            value: lsb,
        },
        OpRecord {
            op: Op::Neg,
            value: mask,
        },
        OpRecord {
            op: Op::And,
            value: folded,
        },
        OpRecord {
            op: Op::Shift,
            value: shifted,
        },
        OpRecord {
            op: Op::Xor,
            value: out,
        },
    ];
    (out, ops)
}

/// Intermediates of the constant-time LFSR update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CtTrace {
    pub lfsr: LfsrTrace,
    /// `d & mask` for the `u_i` computation.
    pub folded_a: [Word16; 8],
    /// `d & mask` for the `v_i` computation.
    pub folded_b: [Word16; 8],
}

/// LFSR update with every `mul_x_inv` replaced by [`mul_x_inv_ct`].
pub fn ct_lfsr_update(s: &LfsrState) -> (LfsrState, CtTrace) {
    let mut t = CtTrace::default();
    for i in 0..8 {
        let (inv_a, ops_a) = mul_x_inv_ct_ops(s.a[i + 8], ALPHA_INV);
        let (inv_b, ops_b) = mul_x_inv_ct_ops(s.b[i + 8], BETA_INV);
        t.folded_a[i] = ops_a[2].value;
        t.folded_b[i] = ops_b[2].value;
        t.lfsr.u[i] = mul_x(s.a[i], ALPHA_MUL) ^ s.a[i + 1] ^ inv_a ^ s.b[i];
        t.lfsr.v[i] = mul_x(s.b[i], BETA_MUL) ^ s.b[i + 3] ^ inv_b ^ s.a[i];
        t.lfsr.lsb_a[i] = s.a[i + 8] & 1 != 0;
        t.lfsr.lsb_b[i] = s.b[i + 8] & 1 != 0;
        debug_assert_eq!(t.lfsr.v[i], feedback_v(s, i));
    }
    (s.shifted_in(&t.lfsr.u, &t.lfsr.v), t)
}
