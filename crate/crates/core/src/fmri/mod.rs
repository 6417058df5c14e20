//! Simulated single-trial fMRI data with known trial weights, and the LSA,
//! LSS and LSS-prior estimators scored against that ground truth.

pub mod config;
pub mod design;
pub mod estimate;
pub mod hrf;
pub mod report;
pub mod simulate;
pub mod smoothing;
pub mod truth;

pub use config::{FmriStudy, SimConfig};
pub use report::{run_study, CellReport, EstimatorReport};
pub use simulate::{simulate, FmriScene};
