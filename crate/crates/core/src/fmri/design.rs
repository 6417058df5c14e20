//! Trial schedules and the LSA design matrix.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use super::config::SimConfig;
use super::hrf::boxcar_response;
use crate::error::{Error, Result};
use crate::linear::DesignMatrix;

/// Trial onsets in seconds, in presentation order.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSchedule {
    pub onsets: Vec<f64>,
    /// Slot indices left empty (null epochs).
    pub null_slots: Vec<usize>,
}

impl EventSchedule {
    /// ℓ trials and ⌈ℓ/3⌉ null epochs in shuffled slots of length ED + ISI.
    pub fn random<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Self {
        let trials = cfg.trials();
        let slots = trials + cfg.null_slots();
        let mut is_null: Vec<bool> = (0..slots).map(|k| k >= trials).collect();
        is_null.shuffle(rng);
        let slot = cfg.ed + cfg.isi;
        let onsets = (0..slots).filter(|&k| !is_null[k]).map(|k| k as f64 * slot).collect();
        let null_slots = (0..slots).filter(|&k| is_null[k]).collect();
        Self { onsets, null_slots }
    }

    pub fn from_onsets(onsets: Vec<f64>) -> Self {
        Self {
            onsets,
            null_slots: Vec::new(),
        }
    }
}

/// `n × ℓ`: column `k` is the trial-`k` boxcar convolved with the HRF,
/// sampled at `t = i · TR` for `i = 0..n`.
pub fn build_design_lsa(cfg: &SimConfig, schedule: &EventSchedule) -> Result<DesignMatrix> {
    let onsets = &schedule.onsets;
    if onsets.len() != cfg.trials() {
        return Err(Error::Config(format!(
            "schedule has {} trials, config expects {}",
            onsets.len(),
            cfg.trials()
        )));
    }
    if onsets.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Config("onsets must be finite and >= 0".into()));
    }
    let mut sorted = onsets.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[1] - w[0] < cfg.ed) {
        return Err(Error::Config("trial events overlap".into()));
    }
    let n = cfg.scans();
    let span = n as f64 * cfg.tr;
    if sorted.last().is_some_and(|&t| t + cfg.ed > span) {
        return Err(Error::Config(format!("events run past the last scan at {span} s")));
    }
    let x = DMatrix::from_fn(n, onsets.len(), |i, k| {
        boxcar_response(i as f64 * cfg.tr, onsets[k], cfg.ed)
    });
    DesignMatrix::new(x)
}
