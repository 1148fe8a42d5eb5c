//! SNOW-V, simulated power leakage of its initialization, and the
//! side-channel attacks and countermeasures around the LFSR update.

pub mod attack;
pub mod cipher;
pub mod countermeasures;
pub mod error;
pub mod leakage;
pub mod scalar;

pub use scalar::Scalar;

pub type TvlaResult = attack::TvlaResult<f64>;
pub type KeyRanking = attack::KeyRanking<f64>;
pub type CpaResult = attack::CpaResult<f64>;
pub type KkcResult = attack::KkcResult<f64>;
pub type MtdCurve = attack::MtdCurve<f64>;
pub type LdaModel = attack::LdaModel<f64>;
