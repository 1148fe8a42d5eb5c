use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cipher::{feedback_u, feedback_v, LfsrState, Word16};
use crate::error::CountermeasureError;

/// Execution order of the eight sub-iterations: a permutation of the
/// independent first five, followed by 5, 6, 7 in natural order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u8; 8]", into = "[u8; 8]")]
pub struct ShuffleOrder([u8; 8]);

impl ShuffleOrder {
    pub const IDENTITY: ShuffleOrder = ShuffleOrder([0, 1, 2, 3, 4, 5, 6, 7]);

    pub fn new(first_five: [u8; 5]) -> Result<Self, CountermeasureError> {
        let mut order = [0, 0, 0, 0, 0, 5, 6, 7];
        order[..5].copy_from_slice(&first_five);
        Self::from_order(order)
    }

    pub fn from_order(order: [u8; 8]) -> Result<Self, CountermeasureError> {
        let mut seen = [false; 5];
        for &i in &order[..5] {
            if i >= 5 || std::mem::replace(&mut seen[i as usize], true) {
                return Err(CountermeasureError::InvalidShuffle(order));
            }
        }
        if order[5..] != [5, 6, 7] {
            return Err(CountermeasureError::InvalidShuffle(order));
        }
        Ok(ShuffleOrder(order))
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut first = [0u8, 1, 2, 3, 4];
        first.shuffle(rng);
        Self::new(first).expect("shuffled indices are a permutation")
    }

    /// All 120 valid orders.
    pub fn all() -> Vec<ShuffleOrder> {
        let mut out = Vec::with_capacity(120);
        let mut items = [0u8, 1, 2, 3, 4];
        permutations(&mut items, 0, &mut out);
        out
    }

    pub fn as_array(&self) -> [u8; 8] {
        self.0
    }
}

fn permutations(items: &mut [u8; 5], k: usize, out: &mut Vec<ShuffleOrder>) {
    if k == items.len() {
        out.push(ShuffleOrder::new(*items).unwrap());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

impl TryFrom<[u8; 8]> for ShuffleOrder {
    type Error = CountermeasureError;

    fn try_from(order: [u8; 8]) -> Result<Self, Self::Error> {
        ShuffleOrder::from_order(order)
    }
}

impl From<ShuffleOrder> for [u8; 8] {
    fn from(o: ShuffleOrder) -> [u8; 8] {
        o.0
    }
}

/// One executed sub-iteration of a shuffled update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShuffledStep {
    /// Original iteration index.
    pub index: u8,
    pub u: Word16,
    pub v: Word16,
    pub lsb_a: bool,
    pub lsb_b: bool,
}

/// LFSR update executing the sub-iterations in `order`. The steps are
/// returned in executed order.
pub fn shuffled_lfsr_update(
    state: &LfsrState,
    order: &ShuffleOrder,
) -> (LfsrState, [ShuffledStep; 8]) {
    let mut u = [0u16; 8];
    let mut v = [0u16; 8];
    let steps = order.0.map(|idx| {
        let i = idx as usize;
        u[i] = feedback_u(state, i);
        v[i] = feedback_v(state, i);
        ShuffledStep {
            index: idx,
            u: u[i],
            v: v[i],
            lsb_a: state.a[i + 8] & 1 != 0,
            lsb_b: state.b[i + 8] & 1 != 0,
        }
    });
    (state.shifted_in(&u, &v), steps)
}
