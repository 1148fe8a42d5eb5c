//! Simulated power traces of the initialization phase.

mod model;
mod simulate;
mod traceset;

pub use model::{LeakageModel, PointKind, PointSelection, SamplePoint};
pub use simulate::{
    observed_update, reference_keystream, simulate_trace, simulate_trace_set, BranchObs, IvPolicy,
    KeyPolicy, SimulatedTrace, SimulationConfig, SlotObs,
};
pub use traceset::{sample_path, TraceMeta, TraceSet, FORMAT_NAME, FORMAT_VERSION};
