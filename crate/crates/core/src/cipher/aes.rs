//! One AES encryption round (SubBytes, ShiftRows, MixColumns, AddRoundKey).
//!
//! Byte `i` of a block sits at row `i % 4`, column `i / 4`, as in FIPS-197.

use super::block::Block128;

#[rustfmt::skip]
pub(crate) const SBOX: [u8; 256] = [
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
];

#[inline]
fn xtime(b: u8) -> u8 {
    (b << 1) ^ if b & 0x80 != 0 { 0x1b } else { 0 }
}

pub fn aes_enc_round(state: Block128, round_key: Block128) -> Block128 {
    let s = state.0;
    let mut shifted = [0u8; 16];
    for col in 0..4 {
        for row in 0..4 {
            shifted[row + 4 * col] = SBOX[s[row + 4 * ((col + row) % 4)] as usize];
        }
    }

    let mut out = [0u8; 16];
    for col in 0..4 {
        let c = &shifted[4 * col..4 * col + 4];
        let all = c[0] ^ c[1] ^ c[2] ^ c[3];
        for row in 0..4 {
            // 2*a_r + 3*a_{r+1} + a_{r+2} + a_{r+3} = a_r ^ all ^ 2*(a_r ^ a_{r+1})
            out[row + 4 * col] = c[row] ^ all ^ xtime(c[row] ^ c[(row + 1) % 4]);
        }
    }

    Block128(out) ^ round_key
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Table-driven oracle: S-box derived from GF(2^8) inversion plus the
    /// affine map, then the classic T-table round.
    struct Oracle {
        t0: [u32; 256],
    }

    fn gf_mul(mut a: u8, mut b: u8) -> u8 {
        let mut p = 0u8;
        while b != 0 {
            if b & 1 != 0 {
                p ^= a;
            }
            let hi = a & 0x80;
            a <<= 1;
            if hi != 0 {
                a ^= 0x1b;
            }
            b >>= 1;
        }
        p
    }

    impl Oracle {
        fn new() -> Self {
            let mut sbox = [0u8; 256];
            for (x, slot) in sbox.iter_mut().enumerate() {
                let inv = if x == 0 {
                    0
                } else {
                    (1..=255u8).find(|&y| gf_mul(x as u8, y) == 1).unwrap()
                };
                let mut s = inv;
                for shift in 1..5 {
                    s ^= inv.rotate_left(shift);
                }
                *slot = s ^ 0x63;
            }
            let mut t0 = [0u32; 256];
            for x in 0..256 {
                let s = sbox[x];
                t0[x] = u32::from_be_bytes([gf_mul(s, 2), s, s, gf_mul(s, 3)]);
            }
            Oracle { t0 }
        }

        fn round(&self, state: [u8; 16], key: [u8; 16]) -> [u8; 16] {
            let mut out = [0u8; 16];
            for c in 0..4 {
                let mut w = 0u32;
                for r in 0..4 {
                    let b = state[r + 4 * ((c + r) % 4)];
                    w ^= self.t0[b as usize].rotate_right(8 * r as u32);
                }
                out[4 * c..4 * c + 4].copy_from_slice(&w.to_be_bytes());
            }
            for (o, k) in out.iter_mut().zip(key) {
                *o ^= k;
            }
            out
        }
    }

    #[test]
    fn zero_state_zero_key() {
        assert_eq!(
            aes_enc_round(Block128::ZERO, Block128::ZERO),
            Block128::splat(0x63)
        );
    }

    #[test]
    fn round_key_is_added_last() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = Block128(rng.random());
            let k = Block128(rng.random());
            assert_eq!(aes_enc_round(x, k) ^ aes_enc_round(x, Block128::ZERO), k);
        }
    }

    #[test]
    fn sbox_matches_derived_table() {
        let oracle = Oracle::new();
        for x in 0..256 {
            assert_eq!((oracle.t0[x] >> 16) as u8, SBOX[x]);
        }
    }

    #[test]
    fn agrees_with_table_oracle() {
        let oracle = Oracle::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0xAE5);
        for _ in 0..10_000 {
            let x: [u8; 16] = rng.random();
            let k: [u8; 16] = rng.random();
            assert_eq!(
                aes_enc_round(Block128(x), Block128(k)).0,
                oracle.round(x, k)
            );
        }
    }
}
