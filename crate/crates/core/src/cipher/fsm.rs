use serde::{Deserialize, Serialize};

use super::aes::aes_enc_round;
use super::block::{add32x4, sigma_permute, Block128};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FsmState {
    pub r1: Block128,
    pub r2: Block128,
    pub r3: Block128,
}

/// `z = (R1 + T1) ^ R2`.
pub fn fsm_output(fsm: &FsmState, t1: Block128) -> Block128 {
    add32x4(fsm.r1, t1) ^ fsm.r2
}

/// Updates R1..R3 from the T2 tap. Both AES rounds use an all-zero round key.
pub fn fsm_update(fsm: &FsmState, t2: Block128) -> FsmState {
    let tmp = add32x4(fsm.r2, fsm.r3 ^ t2);
    FsmState {
        r1: sigma_permute(tmp),
        r2: aes_enc_round(fsm.r1, Block128::ZERO),
        r3: aes_enc_round(fsm.r2, Block128::ZERO),
    }
}
