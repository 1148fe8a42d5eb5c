//! Known-key correlation: locating the sample that leaks an intermediate.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::stats::{argmax_abs, pearson};
use crate::cipher::{feedback_u, feedback_v, CipherState, Key256, Word16};
use crate::error::AttackError;
use crate::leakage::TraceSet;
use crate::Scalar;

/// A feedback word of the first LFSR update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intermediate {
    U(u8),
    V(u8),
}

impl Intermediate {
    pub fn value(self, key: &Key256, iv: &crate::cipher::Iv128) -> Word16 {
        let s = CipherState::load(key, iv).lfsr;
        match self {
            Intermediate::U(i) => feedback_u(&s, i as usize),
            Intermediate::V(i) => feedback_v(&s, i as usize),
        }
    }

    /// Name of the sample column that observes this word in round 1.
    pub fn point_name(self) -> String {
        match self {
            Intermediate::U(i) => format!("r1.s{i}.u"),
            Intermediate::V(i) => format!("r1.s{i}.v"),
        }
    }
}

impl fmt::Display for Intermediate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Intermediate::U(i) => write!(f, "u{i}"),
            Intermediate::V(i) => write!(f, "v{i}"),
        }
    }
}

/// How many low bits of the intermediate the Hamming-weight model covers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum HwModel {
    #[serde(rename = "4")]
    Bits4,
    #[serde(rename = "6")]
    Bits6,
    #[default]
    #[serde(rename = "8")]
    Bits8,
    #[serde(rename = "16")]
    Bits16,
}

impl HwModel {
    pub const ALL: [HwModel; 4] = [
        HwModel::Bits4,
        HwModel::Bits6,
        HwModel::Bits8,
        HwModel::Bits16,
    ];

    pub fn bits(self) -> u32 {
        match self {
            HwModel::Bits4 => 4,
            HwModel::Bits6 => 6,
            HwModel::Bits8 => 8,
            HwModel::Bits16 => 16,
        }
    }

    pub fn mask(self) -> Word16 {
        ((1u32 << self.bits()) - 1) as Word16
    }

    pub fn from_bits(bits: u32) -> Option<HwModel> {
        HwModel::ALL.into_iter().find(|m| m.bits() == bits)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KkcResult<S> {
    pub correlations: Vec<S>,
    /// Argmax of `|correlation|`.
    pub poi: usize,
    /// Columns with zero variance, reported as correlation 0.
    pub zero_variance: Vec<usize>,
}

/// Correlates each sample with the modeled Hamming weight of `target`.
/// With `key = None` every trace must carry its own key.
pub fn kkc<S: Scalar>(
    ts: &TraceSet,
    key: Option<&Key256>,
    target: Intermediate,
    model: HwModel,
) -> Result<KkcResult<S>, AttackError> {
    let n = ts.n_traces();
    if n < 2 {
        return Err(AttackError::TooFewTraces {
            needed: 2,
            found: n,
        });
    }
    let hyp: Vec<S> = ts
        .traces()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let k = key.or(m.key.as_ref()).ok_or(AttackError::MissingMetadata {
                index: i,
                what: "key",
            })?;
            Ok(S::of_usize(
                (target.value(k, &m.iv) & model.mask()).count_ones() as usize,
            ))
        })
        .collect::<Result<_, AttackError>>()?;
    let mut zero_variance = Vec::new();
    let correlations: Vec<S> = (0..ts.n_samples())
        .map(|j| {
            pearson(&ts.column::<S>(j, n), &hyp).unwrap_or_else(|| {
                zero_variance.push(j);
                S::zero()
            })
        })
        .collect();
    let poi = argmax_abs(&correlations).unwrap_or(0);
    Ok(KkcResult {
        correlations,
        poi,
        zero_variance,
    })
}
