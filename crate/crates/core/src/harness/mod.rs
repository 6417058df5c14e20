//! Data loading, penalty sweeps and their summaries.

pub mod data;
pub mod entropy;
pub mod sweep;
pub mod synthetic;

pub use data::{DatasetKind, MedianRule, RawTable, TernaryDataset};
pub use entropy::normalized_entropy;
pub use sweep::{run_sweep, PenaltySweepResult, Solver, SweepConfig};
