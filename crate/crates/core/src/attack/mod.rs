//! Leakage detection, correlation attacks and key recovery.

pub mod cpa;
pub mod kkc;
pub mod lda;
pub mod mtd;
pub mod recover;
pub mod stats;
pub mod tvla;

pub use cpa::{
    cpa_byte, disambiguate, known_term, Cell, CpaResult, GhostSet, Half, KeyRanking, KnownKey,
    Lfsr, Target,
};
pub use kkc::{kkc, HwModel, Intermediate, KkcResult};
pub use lda::{accuracy, lda_accuracy_curve, lda_predict, lda_train, LdaModel, LdaPoint};
pub use mtd::{mtd_curve, MtdCurve, MtdPoint};
pub use recover::{
    dependency_schedule, incremental_recover, incremental_recover_with, AttackReport, ByteReport,
    Dependency, FailureReason, LdaVerdict, RecoverConfig, RecoverFailure,
};
pub use tvla::{
    first_crossing, tvla_incremental, tvla_window, welch, welch_t, TvlaPoint, TvlaResult,
    TVLA_THRESHOLD,
};
