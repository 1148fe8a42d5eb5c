use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cipher::INIT_ROUNDS;
use crate::error::TraceError;

/// Which operation inside one LFSR sub-iteration a sample observes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    /// `mul_x_inv` on `a_{i+8}`.
    BranchA,
    U,
    /// `mul_x_inv` on `b_{i+8}`.
    BranchB,
    V,
}

impl PointKind {
    /// Order of the operations within one sub-iteration.
    pub const SEQUENCE: [PointKind; 4] = [
        PointKind::BranchA,
        PointKind::U,
        PointKind::BranchB,
        PointKind::V,
    ];

    fn tag(self) -> &'static str {
        match self {
            PointKind::BranchA => "branch_a",
            PointKind::U => "u",
            PointKind::BranchB => "branch_b",
            PointKind::V => "v",
        }
    }
}

/// A named sample column: initialization round (1-based), execution slot
/// within that round's LFSR update, and the observed operation.
///
/// Slots equal iteration indices except in the shuffled variant, where slot
/// `j` holds whichever iteration executed `j`-th.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SamplePoint {
    pub round: u8,
    pub slot: u8,
    pub kind: PointKind,
}

impl SamplePoint {
    pub fn new(round: u8, slot: u8, kind: PointKind) -> Self {
        SamplePoint { round, slot, kind }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SamplePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}.s{}.{}", self.round, self.slot, self.kind.tag())
    }
}

/// Which intermediates become samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointSelection {
    /// Number of initialization rounds observed, starting at round 1.
    pub rounds: u8,
    /// Emit the `u_i`/`v_i` samples.
    pub intermediates: bool,
    /// Emit one sample per `mul_x_inv` invocation.
    pub branches: bool,
}

impl Default for PointSelection {
    fn default() -> Self {
        PointSelection {
            rounds: 1,
            intermediates: true,
            branches: true,
        }
    }
}

impl PointSelection {
    /// Every initialization round.
    pub fn full() -> Self {
        PointSelection {
            rounds: INIT_ROUNDS,
            ..Default::default()
        }
    }
}

/// Hamming-weight leakage with additive Gaussian noise.
///
/// A `u`/`v` sample is `hw_scale * HW(x & hw_bits) + N(0, noise_sigma)`. A
/// branch sample of the reference code is `branch_delta * [XOR executed]`
/// plus noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageModel {
    pub hw_scale: f64,
    pub noise_sigma: f64,
    pub branch_delta: f64,
    /// Bits of the intermediate that reach the leaking bus.
    pub hw_bits: u16,
    pub points: PointSelection,
}

impl Default for LeakageModel {
    fn default() -> Self {
        LeakageModel {
            hw_scale: 1.0,
            noise_sigma: 1.0,
            branch_delta: 10.0,
            hw_bits: 0xFFFF,
            points: PointSelection::default(),
        }
    }
}

impl LeakageModel {
    pub fn noiseless() -> Self {
        LeakageModel {
            noise_sigma: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: &str| Err(TraceError::Inconsistent(m.to_string()));
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return bad("noise_sigma must be a finite value >= 0");
        }
        if !self.hw_scale.is_finite() || !self.branch_delta.is_finite() {
            return bad("hw_scale and branch_delta must be finite");
        }
        let p = &self.points;
        if p.rounds == 0 || p.rounds > INIT_ROUNDS {
            return bad("points.rounds must be in 1..=16");
        }
        if !p.intermediates && !p.branches {
            return bad("at least one sample point must be selected");
        }
        if p.intermediates && self.hw_bits == 0 {
            return bad("hw_bits selects no bits");
        }
        Ok(())
    }

    /// Sample columns in time order.
    pub fn sample_points(&self) -> Vec<SamplePoint> {
        let p = &self.points;
        let mut out = Vec::new();
        for round in 1..=p.rounds {
            for slot in 0..8 {
                for kind in PointKind::SEQUENCE {
                    let keep = match kind {
                        PointKind::U | PointKind::V => p.intermediates,
                        PointKind::BranchA | PointKind::BranchB => p.branches,
                    };
                    if keep {
                        out.push(SamplePoint::new(round, slot, kind));
                    }
                }
            }
        }
        out
    }
}
