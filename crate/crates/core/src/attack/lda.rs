//! Fisher linear discriminant for the secret LSB.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::stats::prefix_steps;
use crate::error::AttackError;
use crate::leakage::TraceSet;
use crate::Scalar;

/// Relative ridge added to the pooled covariance diagonal.
pub const LDA_RIDGE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaModel<S> {
    pub poi_window: Range<usize>,
    pub projection: Vec<S>,
    pub threshold: S,
    /// Projected means of class 0 and class 1.
    pub class_means: [S; 2],
    pub regularization: S,
    pub training_accuracy: S,
}

/// Solves `m x = rhs` for symmetric positive definite `m` (row-major).
fn cholesky_solve<S: Scalar>(m: &[S], rhs: &[S]) -> Option<Vec<S>> {
    let n = rhs.len();
    let mut l = vec![S::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= S::zero() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![S::zero(); n];
    for i in 0..n {
        let s = (0..i).fold(rhs[i], |s, k| s - l[i * n + k] * y[k]);
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let s = (i + 1..n).fold(y[i], |s, k| s - l[k * n + i] * x[k]);
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

fn check_window(ts: &TraceSet, w: &Range<usize>) -> Result<(), AttackError> {
    if w.is_empty() || w.end > ts.n_samples() {
        return Err(AttackError::BadWindow {
            start: w.start,
            end: w.end,
            width: ts.n_samples(),
        });
    }
    Ok(())
}

/// Trains on the first `labels.len()` traces of `ts`.
pub fn lda_train<S: Scalar>(
    ts: &TraceSet,
    labels: &[bool],
    window: Range<usize>,
) -> Result<LdaModel<S>, AttackError> {
    check_window(ts, &window)?;
    let n = labels.len();
    if n > ts.n_traces() {
        return Err(AttackError::TooFewTraces {
            needed: n,
            found: ts.n_traces(),
        });
    }
    let n1 = labels.iter().filter(|&&b| b).count();
    let n0 = n - n1;
    if n0 == 0 || n1 == 0 {
        return Err(AttackError::SingleClass);
    }
    let w = window.len();
    let rows: Vec<Vec<S>> = (0..n)
        .map(|i| {
            ts.row(i)[window.clone()]
                .iter()
                .map(|&x| S::of_f32(x))
                .collect()
        })
        .collect();

    let mut mu = [vec![S::zero(); w], vec![S::zero(); w]];
    for (r, &y) in rows.iter().zip(labels) {
        for (m, &x) in mu[y as usize].iter_mut().zip(r) {
            *m = *m + x;
        }
    }
    for (m, c) in mu.iter_mut().zip([n0, n1]) {
        m.iter_mut().for_each(|v| *v = *v / S::of_usize(c));
    }

    let mut cov = vec![S::zero(); w * w];
    for (r, &y) in rows.iter().zip(labels) {
        let d: Vec<S> = r
            .iter()
            .zip(&mu[y as usize])
            .map(|(&x, &m)| x - m)
            .collect();
        for a in 0..w {
            for b in 0..=a {
                cov[a * w + b] = cov[a * w + b] + d[a] * d[b];
            }
        }
    }
    let dof = S::of_usize(n.saturating_sub(2).max(1));
    for a in 0..w {
        for b in 0..=a {
            let v = cov[a * w + b] / dof;
            cov[a * w + b] = v;
            cov[b * w + a] = v;
        }
    }

    // variance scale of the window, pooled over both classes
    let total_var = (0..w)
        .map(|j| {
            let col: Vec<S> = rows.iter().map(|r| r[j]).collect();
            if n > 1 {
                super::stats::variance(&col)
            } else {
                S::zero()
            }
        })
        .sum::<S>()
        / S::of_usize(w);
    let scale = if total_var > S::zero() {
        total_var
    } else {
        S::one()
    };
    let eps = S::of(LDA_RIDGE) * scale;
    for a in 0..w {
        cov[a * w + a] = cov[a * w + a] + eps;
    }

    let delta: Vec<S> = mu[1].iter().zip(&mu[0]).map(|(&a, &b)| a - b).collect();
    let projection = cholesky_solve(&cov, &delta)
        .ok_or_else(|| AttackError::Shape("pooled covariance is not positive definite".into()))?;
    let proj = |v: &[S]| v.iter().zip(&projection).map(|(&a, &b)| a * b).sum::<S>();
    let class_means = [proj(&mu[0]), proj(&mu[1])];
    let threshold = (class_means[0] + class_means[1]) / S::of(2.0);
    let mut model = LdaModel {
        poi_window: window,
        projection,
        threshold,
        class_means,
        regularization: eps,
        training_accuracy: S::zero(),
    };
    model.training_accuracy = accuracy(&model, ts, labels);
    Ok(model)
}

impl<S: Scalar> LdaModel<S> {
    pub fn project(&self, row: &[f32]) -> S {
        row[self.poi_window.clone()]
            .iter()
            .zip(&self.projection)
            .map(|(&x, &w)| S::of_f32(x) * w)
            .sum()
    }

    /// Classifies a projected value.
    pub fn classify(&self, projected: S) -> bool {
        let one_high = self.class_means[1] >= self.class_means[0];
        (projected >= self.threshold) == one_high
    }
}

/// Predicted LSB of one trace row.
pub fn lda_predict<S: Scalar>(model: &LdaModel<S>, row: &[f32]) -> bool {
    model.classify(model.project(row))
}

/// Fraction of the first `labels.len()` traces classified correctly.
pub fn accuracy<S: Scalar>(model: &LdaModel<S>, ts: &TraceSet, labels: &[bool]) -> S {
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(i, &y)| lda_predict(model, ts.row(i)) == y)
        .count();
    S::of_usize(hits) / S::of_usize(labels.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaPoint<S> {
    pub n_train: usize,
    pub training_accuracy: S,
    pub test_accuracy: Option<S>,
}

/// Training (and optional held-out) accuracy for growing training prefixes.
/// Prefixes that contain a single class are skipped.
pub fn lda_accuracy_curve<S: Scalar>(
    train: &TraceSet,
    labels: &[bool],
    test: Option<(&TraceSet, &[bool])>,
    window: Range<usize>,
    steps: Option<&[usize]>,
) -> Result<Vec<LdaPoint<S>>, AttackError> {
    let n = labels.len();
    let default;
    let steps = match steps {
        Some(s) => s,
        None => {
            default = prefix_steps(2, 20, n, 30);
            &default
        }
    };
    let mut out = Vec::new();
    for &k in steps.iter().filter(|&&k| (2..=n).contains(&k)) {
        let m = match lda_train::<S>(train, &labels[..k], window.clone()) {
            Ok(m) => m,
            Err(AttackError::SingleClass) => continue,
            Err(e) => return Err(e),
        };
        out.push(LdaPoint {
            n_train: k,
            training_accuracy: m.training_accuracy,
            test_accuracy: test.map(|(t, l)| accuracy(&m, t, l)),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leakage::TraceMeta;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn set(rows: &[Vec<f32>]) -> TraceSet {
        let w = rows[0].len();
        TraceSet::new(
            rows.concat(),
            w,
            vec![TraceMeta::default(); rows.len()],
            TraceSet::anonymous_points(w),
            None,
        )
        .unwrap()
    }

    /// Class 1 shifted by `delta` in column 1, unit noise elsewhere.
    fn gaussian(n: usize, delta: f32, sigma: f32, seed: u64) -> (TraceSet, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let rows: Vec<Vec<f32>> = labels
            .iter()
            .map(|&y| {
                (0..3)
                    .map(|j| {
                        let e: f32 = rng.sample(StandardNormal);
                        sigma * e + if j == 1 && y { delta } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        (set(&rows), labels)
    }

    #[test]
    fn cholesky_against_known_solution() {
        let m = [4.0f64, 2.0, 2.0, 3.0];
        let x = cholesky_solve(&m, &[2.0, 1.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12 && x[1].abs() < 1e-12);
        assert!(cholesky_solve(&[0.0f64], &[1.0]).is_none());
    }

    #[test]
    fn two_noiseless_traces_separate() {
        let ts = set(&[vec![0.0, 5.0], vec![1.0, 5.0]]);
        let m = lda_train::<f64>(&ts, &[false, true], 0..2).unwrap();
        assert_eq!(m.training_accuracy, 1.0);
        assert!(m.class_means[0] != m.class_means[1]);
        assert!(!m.classify(m.class_means[0]));
        assert!(m.classify(m.class_means[1]));
    }

    #[test]
    fn single_class_and_window_rejected() {
        let ts = set(&[vec![0.0], vec![1.0]]);
        assert_eq!(
            lda_train::<f64>(&ts, &[true, true], 0..1),
            Err(AttackError::SingleClass)
        );
        assert!(matches!(
            lda_train::<f64>(&ts, &[true, false], 0..2),
            Err(AttackError::BadWindow { .. })
        ));
    }

    #[test]
    fn separable_held_out() {
        let (train, y) = gaussian(200, 10.0, 1.0, 1);
        let (test, yt) = gaussian(500, 10.0, 1.0, 2);
        let m = lda_train::<f64>(&train, &y, 0..3).unwrap();
        assert_eq!(accuracy(&m, &test, &yt), 1.0);
    }

    #[test]
    fn shuffled_labels_near_chance() {
        let (test, _) = gaussian(4000, 10.0, 1.0, 4);
        let (train, y) = gaussian(400, 10.0, 1.0, 3);
        let m = lda_train::<f64>(&train, &y, 0..3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let random: Vec<bool> = (0..4000).map(|_| rng.random()).collect();
        let acc = accuracy(&m, &test, &random);
        // 4 sigma for a fair coin over 4000 trials
        assert!((acc - 0.5).abs() < 4.0 * (0.25f64 / 4000.0).sqrt(), "{acc}");
    }

    #[test]
    fn accuracy_curve_skips_single_class() {
        let ts = set(&[vec![0.0], vec![0.1], vec![1.0], vec![1.1]]);
        let y = [false, false, true, true];
        let c = lda_accuracy_curve::<f64>(&ts, &y, None, 0..1, None).unwrap();
        assert_eq!(c.iter().map(|p| p.n_train).collect::<Vec<_>>(), vec![3, 4]);
    }

    proptest! {
        #[test]
        fn training_accuracy_reproducible(seed: u64, n in 10usize..80) {
            let (ts, y) = gaussian(n, 1.0, 1.0, seed);
            prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
            let m = lda_train::<f64>(&ts, &y, 0..3).unwrap();
            prop_assert_eq!(m.training_accuracy, accuracy(&m, &ts, &y));
        }

        #[test]
        fn scale_invariant_predictions(seed: u64, c in 0.1f32..50.0) {
            let (ts, y) = gaussian(60, 6.0, 1.0, seed);
            prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
            let m1 = lda_train::<f64>(&ts, &y, 0..3).unwrap();
            let scaled = ts.scaled(c);
            let m2 = lda_train::<f64>(&scaled, &y, 0..3).unwrap();
            for i in 0..60 {
                let p1 = m1.project(ts.row(i));
                let margin = (p1 - m1.threshold).abs() / (m1.class_means[1] - m1.class_means[0]).abs();
                if margin > 1e-6 {
                    prop_assert_eq!(lda_predict(&m1, ts.row(i)), lda_predict(&m2, scaled.row(i)));
                }
            }
        }
    }
}
