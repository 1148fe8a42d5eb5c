//! Minimum traces to disclosure.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::cpa::{cpa_prefix, GhostSet, Half, KnownKey, Target};
use super::stats::prefix_steps;
use crate::error::AttackError;
use crate::leakage::TraceSet;
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MtdPoint<S> {
    pub n: usize,
    /// The true byte's positive pair (or the true byte alone, for high
    /// halves) leads the ranking.
    pub success: bool,
    /// Rank of the true byte.
    pub rank: usize,
    pub true_peak: S,
    /// Best positive peak among wrong candidates.
    pub best_wrong_peak: S,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MtdCurve<S> {
    pub target: Target,
    pub true_byte: u8,
    pub points: Vec<MtdPoint<S>>,
    /// Smallest prefix after which every larger prefix succeeds.
    pub mtd: Option<usize>,
}

/// Reruns CPA on growing prefixes. Default steps: every count to 20, then
/// 40 geometric steps to the full set.
pub fn mtd_curve<S: Scalar>(
    ts: &TraceSet,
    target: Target,
    known: &KnownKey,
    true_byte: u8,
    window: Option<Range<usize>>,
    steps: Option<&[usize]>,
) -> Result<MtdCurve<S>, AttackError> {
    let n = ts.n_traces();
    let default;
    let steps = match steps {
        Some(s) => s,
        None => {
            default = prefix_steps(2, 20, n, 40);
            &default
        }
    };
    let winners: Vec<u8> = match target.half {
        Half::Low => GhostSet::for_byte(true_byte, target.cell.inverse_constant())
            .positive()
            .to_vec(),
        Half::High => vec![true_byte],
    };
    let points = steps
        .iter()
        .filter(|&&k| (2..=n).contains(&k))
        .map(|&k| {
            let r = cpa_prefix::<S>(ts, k, target, known, window.clone())?.ranking;
            let lead = &r.ordering[..winners.len()];
            let success = winners.iter().all(|w| lead.contains(w))
                && r.signed_peak[true_byte as usize] > S::zero();
            let best_wrong_peak = r
                .ordering
                .iter()
                .find(|h| !winners.contains(h))
                .map(|&h| r.signed_peak[h as usize])
                .unwrap_or(S::zero());
            Ok(MtdPoint {
                n: k,
                success,
                rank: r.rank_of(true_byte),
                true_peak: r.signed_peak[true_byte as usize],
                best_wrong_peak,
            })
        })
        .collect::<Result<Vec<_>, AttackError>>()?;
    Ok(MtdCurve {
        target,
        true_byte,
        mtd: mtd_of(&points),
        points,
    })
}

fn mtd_of<S>(points: &[MtdPoint<S>]) -> Option<usize> {
    let tail = points.iter().rev().take_while(|p| p.success).count();
    (tail > 0).then(|| points[points.len() - tail].n)
}
