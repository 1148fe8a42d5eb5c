//! Incremental recovery of all sixteen key words.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cpa::{cpa_byte, disambiguate, Cell, GhostSet, KnownKey, Lfsr, Target};
use super::kkc::{kkc, HwModel};
use super::lda::{lda_predict, lda_train};
use super::mtd::mtd_curve;
use super::stats::{argmax_abs, pearson, prefix_steps};
use crate::cipher::{keystream, Key256};
use crate::error::AttackError;
use crate::leakage::TraceSet;
use crate::Scalar;

/// A cell whose feedback word also contains an earlier key word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    pub iteration: u8,
    pub target: Cell,
    pub needs: Cell,
}

pub fn dependency_schedule() -> Vec<Dependency> {
    Cell::schedule()
        .filter_map(|c| {
            c.dependency().map(|d| Dependency {
                iteration: c.iteration(),
                target: c,
                needs: d,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverConfig {
    /// CPA window half-width around the profiled point of interest.
    pub poi_half_width: usize,
    /// LDA window half-width around the profiled LSB sample.
    pub lda_half_width: usize,
    /// Profiling traces used to train each LDA classifier.
    pub lda_training: usize,
    /// Minimum share of attack traces that must agree on the LSB.
    pub min_vote: f64,
    /// Compute per-byte MTD against the recovered byte.
    pub compute_mtd: bool,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        RecoverConfig {
            poi_half_width: 5,
            lda_half_width: 0,
            lda_training: 200,
            min_vote: 0.75,
            compute_mtd: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaVerdict {
    pub lsb: bool,
    /// Attack traces classified as LSB = 1.
    pub votes_one: usize,
    pub votes: usize,
    pub first_trace: bool,
    pub training_accuracy: f64,
    pub window: Range<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ByteReport {
    pub target: Target,
    pub recovered: Option<u8>,
    pub window: Range<usize>,
    /// Best five candidates with their signed peaks.
    pub top: Vec<(u8, f64)>,
    pub ghost: Option<GhostSet>,
    pub lda: Option<LdaVerdict>,
    pub mtd: Option<usize>,
    pub insufficient: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub a: [Option<u16>; 8],
    pub b: [Option<u16>; 8],
    pub key: Option<Key256>,
    pub bytes: Vec<ByteReport>,
    /// Cells supplied by the caller instead of attacked.
    pub supplied: Vec<Cell>,
    pub attack_traces: usize,
    pub profiling_traces: usize,
    pub schedule: Vec<Dependency>,
    /// Recovered key reproduces the keystream recorded with the traces.
    pub keystream_verified: Option<bool>,
    pub complete: bool,
}

impl AttackReport {
    fn new(attack: &TraceSet, profiling: &TraceSet) -> Self {
        AttackReport {
            a: [None; 8],
            b: [None; 8],
            key: None,
            bytes: Vec::new(),
            supplied: Vec::new(),
            attack_traces: attack.n_traces(),
            profiling_traces: profiling.n_traces(),
            schedule: dependency_schedule(),
            keystream_verified: None,
            complete: false,
        }
    }

    fn set(&mut self, cell: Cell, w: u16) {
        let slot = match cell.lfsr {
            Lfsr::A => &mut self.a,
            Lfsr::B => &mut self.b,
        };
        slot[cell.iteration() as usize] = Some(w);
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum FailureReason {
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("{target} unresolved: {why}")]
    Unresolved { target: Target, why: String },
    #[error("recovered key does not reproduce the recorded keystream; dependent words: {}",
        .dependencies.iter().map(|d| format!("{} via {}", d.target, d.needs)).collect::<Vec<_>>().join(", "))]
    KeystreamMismatch { dependencies: Vec<Dependency> },
}

/// A failed recovery with everything resolved up to the failure.
#[derive(Clone, Debug, PartialEq, Error)]
#[error("{reason}")]
pub struct RecoverFailure {
    pub reason: FailureReason,
    pub report: Box<AttackReport>,
}

fn window_around(center: usize, half: usize, width: usize) -> Range<usize> {
    center.saturating_sub(half)..(center + half + 1).min(width)
}

/// Column most correlated with the profiling labels.
fn lsb_poi<S: Scalar>(profiling: &TraceSet, labels: &[bool]) -> usize {
    let y: Vec<S> = labels.iter().map(|&b| S::of_usize(b as usize)).collect();
    let n = labels.len();
    let r: Vec<S> = (0..profiling.n_samples())
        .map(|j| pearson(&profiling.column::<S>(j, n), &y).unwrap_or(S::zero()))
        .collect();
    argmax_abs(&r).unwrap_or(0)
}

fn profiling_labels(profiling: &TraceSet, cell: Cell) -> Result<Vec<bool>, AttackError> {
    profiling
        .traces()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            m.key
                .map(|k| k.words[cell.key_word()] & 1 == 1)
                .ok_or(AttackError::MissingMetadata {
                    index: i,
                    what: "key",
                })
        })
        .collect()
}

/// Recovers the whole key from `attack` (fixed unknown key, known IVs) with
/// points of interest and LSB classifiers profiled on `profiling` (known
/// per-trace keys).
pub fn incremental_recover<S: Scalar>(
    attack: &TraceSet,
    profiling: &TraceSet,
    cfg: &RecoverConfig,
) -> Result<AttackReport, RecoverFailure> {
    incremental_recover_with::<S>(attack, profiling, cfg, KnownKey::default())
}

/// As [`incremental_recover`], taking the words already in `known` as given.
pub fn incremental_recover_with<S: Scalar>(
    attack: &TraceSet,
    profiling: &TraceSet,
    cfg: &RecoverConfig,
    mut known: KnownKey,
) -> Result<AttackReport, RecoverFailure> {
    let mut report = AttackReport::new(attack, profiling);
    macro_rules! fail {
        ($reason:expr) => {
            return Err(RecoverFailure {
                reason: $reason.into(),
                report: Box::new(report),
            })
        };
    }
    if attack.n_samples() != profiling.n_samples() {
        fail!(AttackError::Shape(format!(
            "attack traces have {} samples, profiling traces {}",
            attack.n_samples(),
            profiling.n_samples()
        )));
    }
    let width = attack.n_samples();
    for cell in Cell::schedule() {
        if let Some(w) = known.word(cell) {
            report.supplied.push(cell);
            report.set(cell, w);
            continue;
        }
        let poi = match kkc::<S>(profiling, None, cell.intermediate(), HwModel::Bits8) {
            Ok(r) => r.poi,
            Err(e) => fail!(e),
        };
        let window = window_around(poi, cfg.poi_half_width, width);

        // low byte: CPA up to the ghost pair, LDA picks the LSB
        let lo = Target::low(cell);
        let cpa = match cpa_byte::<S>(attack, lo, &known, Some(window.clone())) {
            Ok(r) => r,
            Err(e) => fail!(e),
        };
        let ghost = cpa.ghost.expect("low half has a ghost set");
        let labels = match profiling_labels(profiling, cell) {
            Ok(l) => l,
            Err(e) => fail!(e),
        };
        let n_train = cfg.lda_training.min(labels.len());
        let lda_win = window_around(
            lsb_poi::<S>(profiling, &labels[..n_train]),
            cfg.lda_half_width,
            width,
        );
        let model = match lda_train::<S>(profiling, &labels[..n_train], lda_win.clone()) {
            Ok(m) => m,
            Err(e) => fail!(e),
        };
        let votes_one = attack.rows().filter(|r| lda_predict(&model, r)).count();
        let votes = attack.n_traces();
        let lsb = 2 * votes_one >= votes;
        let share = votes_one.max(votes - votes_one) as f64 / votes as f64;
        let verdict = LdaVerdict {
            lsb,
            votes_one,
            votes,
            first_trace: lda_predict(&model, attack.row(0)),
            training_accuracy: model.training_accuracy.to_f64().unwrap_or(f64::NAN),
            window: lda_win,
        };
        let mut byte = byte_report(&cpa.ranking, lo, window.clone());
        byte.ghost = Some(ghost);
        byte.lda = Some(verdict);
        let top_peak = cpa.ranking.signed_peak[cpa.ranking.top() as usize];
        if top_peak <= S::zero() || share < cfg.min_vote {
            let why = if top_peak <= S::zero() {
                "no positive correlation peak".to_string()
            } else {
                format!("LSB vote split {votes_one}/{votes}")
            };
            report.bytes.push(byte);
            fail!(FailureReason::Unresolved { target: lo, why });
        }
        let low = match disambiguate(&ghost, lsb) {
            Ok(b) => b,
            Err(e) => fail!(e),
        };
        byte.recovered = Some(low);
        if cfg.compute_mtd {
            byte.mtd = mtd_of::<S>(attack, lo, &known, low, &window);
        }
        report.bytes.push(byte);
        known.set_low(cell, low);

        // high byte: unique peak with the low byte substituted
        let hi = Target::high(cell);
        let cpa = match cpa_byte::<S>(attack, hi, &known, Some(window.clone())) {
            Ok(r) => r,
            Err(e) => fail!(e),
        };
        let mut byte = byte_report(&cpa.ranking, hi, window.clone());
        let r = &cpa.ranking;
        let (first, second) = (
            r.signed_peak[r.ordering[0] as usize],
            r.signed_peak[r.ordering[1] as usize],
        );
        if first <= S::zero() || first <= second {
            report.bytes.push(byte);
            fail!(FailureReason::Unresolved {
                target: hi,
                why: "no unique positive correlation peak".into()
            });
        }
        let high = r.top();
        byte.recovered = Some(high);
        if cfg.compute_mtd {
            byte.mtd = mtd_of::<S>(attack, hi, &known, high, &window);
        }
        report.bytes.push(byte);
        let w = (high as u16) << 8 | low as u16;
        known.set_word(cell, w);
        report.set(cell, w);
    }

    let key = known.to_key().expect("all cells resolved");
    report.key = Some(key);
    report.keystream_verified = attack
        .traces()
        .iter()
        .find_map(|m| m.keystream.map(|z| keystream(&key, &m.iv, 1)[0] == z));
    if report.keystream_verified == Some(false) {
        let dependencies = dependency_schedule();
        fail!(FailureReason::KeystreamMismatch { dependencies });
    }
    report.complete = true;
    Ok(report)
}

fn byte_report<S: Scalar>(
    r: &super::cpa::KeyRanking<S>,
    target: Target,
    window: Range<usize>,
) -> ByteReport {
    ByteReport {
        target,
        recovered: None,
        window,
        top: r
            .ordering
            .iter()
            .take(5)
            .map(|&h| (h, r.signed_peak[h as usize].to_f64().unwrap_or(f64::NAN)))
            .collect(),
        ghost: None,
        lda: None,
        mtd: None,
        insufficient: r.insufficient,
    }
}

fn mtd_of<S: Scalar>(
    ts: &TraceSet,
    t: Target,
    known: &KnownKey,
    byte: u8,
    w: &Range<usize>,
) -> Option<usize> {
    let steps = prefix_steps(2, 50, ts.n_traces(), 30);
    mtd_curve::<S>(ts, t, known, byte, Some(w.clone()), Some(&steps))
        .ok()
        .and_then(|c| c.mtd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::countermeasures::Variant;
    use crate::leakage::{simulate_trace_set, IvPolicy, KeyPolicy, LeakageModel, SimulationConfig};

    fn sets(key: Key256, n: usize, n_prof: usize) -> (TraceSet, TraceSet) {
        let cfg = |key, n, seed| SimulationConfig {
            key,
            iv: IvPolicy::Random,
            n,
            model: LeakageModel::default(),
            variant: Variant::Reference,
            master_seed: seed,
        };
        (
            simulate_trace_set(&cfg(KeyPolicy::Fixed(key), n, 21)).unwrap(),
            simulate_trace_set(&cfg(KeyPolicy::Random, n_prof, 22)).unwrap(),
        )
    }

    fn test_key() -> Key256 {
        Key256::from_words(core::array::from_fn(|i| {
            0x0016u16.wrapping_add(0x2F3Bu16.wrapping_mul(i as u16))
        }))
    }

    #[test]
    fn schedule_matches_iterations() {
        let s = dependency_schedule();
        let pairs: Vec<(u8, String, String)> = s
            .iter()
            .map(|d| (d.iteration, d.target.to_string(), d.needs.to_string()))
            .collect();
        assert_eq!(
            pairs,
            vec![
                (5, "B[13]".into(), "B[8]".into()),
                (6, "B[14]".into(), "B[9]".into()),
                (7, "A[15]".into(), "A[8]".into()),
                (7, "B[15]".into(), "B[10]".into()),
            ]
        );
    }

    #[test]
    fn recovers_full_key_deterministically() {
        let key = test_key();
        let (attack, prof) = sets(key, 800, 400);
        let cfg = RecoverConfig {
            compute_mtd: false,
            ..Default::default()
        };
        let r = incremental_recover::<f64>(&attack, &prof, &cfg).unwrap();
        assert_eq!(r.key, Some(key));
        assert!(r.complete);
        assert_eq!(r.keystream_verified, Some(true));
        assert_eq!(r.bytes.len(), 32);
        let again = incremental_recover::<f64>(&attack, &prof, &cfg).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn corrupted_a8_surfaces_dependency() {
        let key = test_key();
        let (attack, prof) = sets(key, 500, 300);
        let mut known = KnownKey::default();
        known.set_word(Cell::a(8), key.words[0] ^ 0x0101);
        let cfg = RecoverConfig {
            compute_mtd: false,
            ..Default::default()
        };
        let err = incremental_recover_with::<f64>(&attack, &prof, &cfg, known).unwrap_err();
        match &err.reason {
            FailureReason::KeystreamMismatch { dependencies } => {
                assert!(dependencies.contains(&Dependency {
                    iteration: 7,
                    target: Cell::a(15),
                    needs: Cell::a(8)
                }));
            }
            other => panic!("unexpected failure {other}"),
        }
        assert!(err.to_string().contains("A[15] via A[8]"));
        // every word not depending on A[8] is still right
        let rep = &err.report;
        assert_ne!(rep.a[7], Some(key.words[7]));
        for i in 1..7 {
            assert_eq!(rep.a[i], Some(key.words[i]));
        }
        assert_eq!(rep.supplied, vec![Cell::a(8)]);
    }

    #[test]
    fn profiling_without_keys_fails_with_partial_report() {
        let key = test_key();
        let (attack, _) = sets(key, 50, 10);
        let err = incremental_recover::<f64>(
            &attack,
            &attack.prefix(20).without_keys(),
            &RecoverConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err.reason,
            FailureReason::Attack(AttackError::MissingMetadata { what: "key", .. })
        ));
        assert!(!err.report.complete);
    }
}
