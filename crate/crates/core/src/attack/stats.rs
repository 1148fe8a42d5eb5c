//! Two-pass moments and correlation.

use crate::Scalar;

pub fn mean<S: Scalar>(x: &[S]) -> S {
    x.iter().copied().sum::<S>() / S::of_usize(x.len())
}

/// Unbiased sample variance. Requires at least two values.
pub fn variance<S: Scalar>(x: &[S]) -> S {
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<S>() / S::of_usize(x.len() - 1)
}

/// Pearson correlation, or `None` when either input is constant.
pub fn pearson<S: Scalar>(x: &[S], y: &[S]) -> Option<S> {
    assert_eq!(x.len(), y.len(), "pearson: length mismatch");
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (S::zero(), S::zero(), S::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy = sxy + da * db;
        sxx = sxx + da * da;
        syy = syy + db * db;
    }
    if sxx <= S::zero() || syy <= S::zero() {
        return None;
    }
    Some(clamp_unit(sxy / (sxx.sqrt() * syy.sqrt())))
}

pub(crate) fn clamp_unit<S: Scalar>(r: S) -> S {
    r.max(-S::one()).min(S::one())
}

/// Index of the largest `|x|`, ties toward the lower index.
pub fn argmax_abs<S: Scalar>(x: &[S]) -> Option<usize> {
    let mut best: Option<(usize, S)> = None;
    for (i, &v) in x.iter().enumerate() {
        if best.is_none_or(|(_, b)| v.abs() > b) {
            best = Some((i, v.abs()));
        }
    }
    best.map(|(i, _)| i)
}

/// Prefix sizes for incremental statistics: every count from `start` to
/// `dense_until`, then roughly geometric steps up to and including `end`.
pub fn prefix_steps(
    start: usize,
    dense_until: usize,
    end: usize,
    sparse_points: usize,
) -> Vec<usize> {
    let mut out: Vec<usize> = (start..=dense_until.min(end)).collect();
    let from = out
        .last()
        .copied()
        .unwrap_or(start.saturating_sub(1))
        .max(1);
    if end > from && sparse_points > 0 {
        let ratio = (end as f64 / from as f64).powf(1.0 / sparse_points as f64);
        let mut x = from as f64;
        for _ in 0..sparse_points {
            x *= ratio;
            let n = (x.round() as usize).min(end);
            if out.last().is_none_or(|&l| n > l) {
                out.push(n);
            }
        }
        if out.last() != Some(&end) {
            out.push(end);
        }
    }
    out
}
