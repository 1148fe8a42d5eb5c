//! Fixed-vs-random Welch t-test.

use serde::{Deserialize, Serialize};

use super::stats::{mean, prefix_steps, variance};
use crate::error::AttackError;
use crate::leakage::TraceSet;
use crate::Scalar;

pub const TVLA_THRESHOLD: f64 = 4.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvlaResult<S> {
    pub t_values: Vec<S>,
    pub max_abs_t: S,
    /// Samples with `|t| > threshold`.
    pub crossing_count: usize,
    pub threshold: S,
    /// Samples where both groups were constant; their `t` is reported as 0.
    pub zero_variance: Vec<usize>,
}

/// Welch statistic for one sample position, `None` if both groups are
/// constant there.
pub fn welch<S: Scalar>(a: &[S], b: &[S]) -> Option<S> {
    let (ma, mb) = (mean(a), mean(b));
    let se2 = variance(a) / S::of_usize(a.len()) + variance(b) / S::of_usize(b.len());
    if se2 <= S::zero() {
        return None;
    }
    Some((ma - mb) / se2.sqrt())
}

/// Per-sample Welch t between two groups of equal-width traces.
pub fn welch_t<S: Scalar>(a: &TraceSet, b: &TraceSet) -> Result<TvlaResult<S>, AttackError> {
    welch_t_prefix(a, b, a.n_traces(), b.n_traces())
}

fn welch_t_prefix<S: Scalar>(
    a: &TraceSet,
    b: &TraceSet,
    na: usize,
    nb: usize,
) -> Result<TvlaResult<S>, AttackError> {
    if a.n_samples() != b.n_samples() {
        return Err(AttackError::Shape(format!(
            "groups have {} and {} samples per trace",
            a.n_samples(),
            b.n_samples()
        )));
    }
    if na < 2 || nb < 2 {
        return Err(AttackError::TooFewTraces {
            needed: 2,
            found: na.min(nb),
        });
    }
    let threshold = S::of(TVLA_THRESHOLD);
    let mut t_values = Vec::with_capacity(a.n_samples());
    let mut zero_variance = Vec::new();
    for j in 0..a.n_samples() {
        let t = welch(&a.column::<S>(j, na), &b.column::<S>(j, nb)).unwrap_or_else(|| {
            zero_variance.push(j);
            S::zero()
        });
        t_values.push(t);
    }
    let max_abs_t = t_values.iter().fold(S::zero(), |m, t| m.max(t.abs()));
    let crossing_count = t_values.iter().filter(|t| t.abs() > threshold).count();
    Ok(TvlaResult {
        t_values,
        max_abs_t,
        crossing_count,
        threshold,
        zero_variance,
    })
}

/// One point of an incremental TVLA curve: traces per group and max `|t|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvlaPoint<S> {
    pub n: usize,
    pub max_abs_t: S,
}

/// Max `|t|` over growing prefixes of both sets. `steps` defaults to every
/// count up to 20 followed by 40 geometric steps.
pub fn tvla_incremental<S: Scalar>(
    fixed: &TraceSet,
    random: &TraceSet,
    steps: Option<&[usize]>,
) -> Result<Vec<TvlaPoint<S>>, AttackError> {
    let n = fixed.n_traces().min(random.n_traces());
    let default;
    let steps = match steps {
        Some(s) => s,
        None => {
            default = prefix_steps(2, 20, n, 40);
            &default
        }
    };
    steps
        .iter()
        .filter(|&&k| k <= n)
        .map(|&k| {
            welch_t_prefix::<S>(fixed, random, k, k).map(|r| TvlaPoint {
                n: k,
                max_abs_t: r.max_abs_t,
            })
        })
        .collect()
}

/// First prefix size at which the curve exceeds the threshold.
pub fn first_crossing<S: Scalar>(curve: &[TvlaPoint<S>]) -> Option<usize> {
    let th = S::of(TVLA_THRESHOLD);
    curve.iter().find(|p| p.max_abs_t > th).map(|p| p.n)
}

/// Sample window `peak ± half_width` around the largest `|t|`, clipped to
/// the trace.
pub fn tvla_window<S: Scalar>(r: &TvlaResult<S>, half_width: usize) -> std::ops::Range<usize> {
    let peak = super::stats::argmax_abs(&r.t_values).unwrap_or(0);
    peak.saturating_sub(half_width)..(peak + half_width + 1).min(r.t_values.len())
}
