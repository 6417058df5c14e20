//! Ridge and logistic regression that shrink toward structured, non-zero
//! priors: weight vectors derived from the tallying and take-the-best decision
//! heuristics, and from least-squares-separate (LSS) estimates of fMRI trial
//! responses.
//!
//! The crate also carries the benchmark machinery around those solvers: the
//! paired-comparison and classification sweeps ([`harness`]) and a simulator
//! of single-trial fMRI time series with known ground truth ([`fmri`]).

pub mod error;
pub mod fmri;
pub mod harness;
pub mod heuristics;
pub mod linear;
pub mod logistic;
pub mod priors;

pub use error::{Error, Result};
pub use heuristics::{Choice, CueStats, Heuristic};
pub use linear::{DesignMatrix, RidgeProblem, WeightVector};
pub use logistic::{LogisticProblem, NewtonTrace};
pub use priors::{PriorKind, PriorSpec};
