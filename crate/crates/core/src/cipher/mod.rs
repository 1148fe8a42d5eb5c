//! Bit-exact SNOW-V: field arithmetic, LFSR and FSM updates, initialization
//! and keystream generation (non-AEAD mode).

mod aes;
mod block;
mod field;
mod fsm;
mod lfsr;
mod state;

pub use aes::aes_enc_round;
pub use block::{add32x4, sigma_permute, Block128, SIGMA};
pub use field::{
    contribution7, inverse_constant, mul_x, mul_x_inv, Word16, ALPHA_INV, ALPHA_MUL, BETA_INV,
    BETA_MUL,
};
pub use fsm::{fsm_output, fsm_update, FsmState};
pub use lfsr::{feedback_u, feedback_v, lfsr_update, lfsr_update_traced, LfsrState, LfsrTrace};
pub use state::{initialize, keystream, xor_crypt, CipherState, Iv128, Key256, Phase, INIT_ROUNDS};
