use std::path::PathBuf;

use thiserror::Error;

use crate::cipher::Phase;

#[derive(Debug, Error)]
pub enum CipherError {
    #[error("cipher is in phase {found:?}, expected {expected}")]
    WrongPhase {
        expected: &'static str,
        found: Phase,
    },
    #[error("invalid {what} hex (expected {expected_digits} hex digits): {reason}")]
    Hex {
        what: &'static str,
        expected_digits: usize,
        reason: String,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CountermeasureError {
    #[error("mask randomness exhausted after {consumed} words")]
    RandomnessExhausted { consumed: usize },
    #[error("invalid shuffle order {0:?}: first five entries must permute 0..5, last three must be 5, 6, 7")]
    InvalidShuffle([u8; 8]),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed trace-set header: {0}")]
    MalformedHeader(String),
    #[error("unsupported trace-set version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("inconsistent trace-set parameters: {0}")]
    Inconsistent(String),
    #[error("malformed CSV: {0}")]
    Csv(String),
}

impl TraceError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TraceError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("need at least {needed} traces, found {found}")]
    TooFewTraces { needed: usize, found: usize },
    #[error("trace shape mismatch: {0}")]
    Shape(String),
    #[error("trace {index} has no {what} metadata")]
    MissingMetadata { index: usize, what: &'static str },
    #[error("{target} depends on {needed}, which has not been recovered")]
    MissingDependency { target: String, needed: String },
    #[error("labels contain a single class")]
    SingleClass,
    #[error("LDA window {start}..{end} outside trace of {width} samples")]
    BadWindow {
        start: usize,
        end: usize,
        width: usize,
    },
    #[error("malformed ghost set: {0}")]
    MalformedGhostSet(String),
}
