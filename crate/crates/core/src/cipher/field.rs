//! Multiplication by the generator and its inverse in the two GF(2^16)
//! fields that drive LFSR-A and LFSR-B.

/// One LFSR cell.
pub type Word16 = u16;

/// Reduction constant for `alpha` (LFSR-A).
pub const ALPHA_MUL: Word16 = 0x990F;
/// Reduction constant for `alpha^-1` (LFSR-A).
pub const ALPHA_INV: Word16 = 0xCC87;
/// Reduction constant for `beta` (LFSR-B).
pub const BETA_MUL: Word16 = 0xC963;
/// Reduction constant for `beta^-1` (LFSR-B).
pub const BETA_INV: Word16 = 0xE4B1;

/// Multiplies `v` by the field generator.
#[inline]
pub const fn mul_x(v: Word16, c: Word16) -> Word16 {
    if v & 0x8000 != 0 {
        (v << 1) ^ c
    } else {
        v << 1
    }
}

/// Multiplies `v` by the inverse of the field generator.
///
/// This is the branching form found in the reference code: the XOR with
/// `d` only executes when the least significant bit of `v` is set.
#[inline]
pub const fn mul_x_inv(v: Word16, d: Word16) -> Word16 {
    if v & 0x0001 != 0 {
        (v >> 1) ^ d
    } else {
        v >> 1
    }
}

/// Inverse-multiplication constant implied by a multiplication constant.
pub const fn inverse_constant(c: Word16) -> Word16 {
    (c >> 1) | 0x8000
}

/// The seven low bits of `mul_x_inv(k, d)` that a key byte `k` controls.
///
/// The least significant bit of `k` is shifted out, so two bytes that differ
/// in their LSB (and compensate through `d`) produce the same value.
pub const fn contribution7(k: u8, d: Word16) -> u8 {
    let fold = if k & 1 != 0 { (d & 0x7F) as u8 } else { 0 };
    ((k >> 1) ^ fold) & 0x7F
}
