use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One simulated design: geometry, timing, signal and noise levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Side of the signal cube in voxels.
    pub d: usize,
    pub reps_per_stim: usize,
    pub n_stimuli: usize,
    pub runs: usize,
    /// Seconds per scan.
    pub tr: f64,
    /// Event duration, seconds.
    pub ed: f64,
    /// Interstimulus interval, seconds.
    pub isi: f64,
    pub sigma2_psi: f64,
    pub sigma2_scanner: f64,
    pub fwhm_mm: f64,
    pub fwhm_s: f64,
    pub voxel_mm: [f64; 3],
    /// Slack after the last trial, seconds.
    pub t_end: f64,
    pub v_offdiag: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            d: 7,
            reps_per_stim: 20,
            n_stimuli: 2,
            runs: 2,
            tr: 1.0,
            ed: 1.5,
            isi: 2.0,
            sigma2_psi: 20.0,
            sigma2_scanner: 10_000.0,
            fwhm_mm: 4.0,
            fwhm_s: 4.5,
            voxel_mm: [3.0, 3.0, 3.75],
            t_end: 20.0,
            v_offdiag: 0.7,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// ℓ, the number of trials per run.
    pub fn trials(&self) -> usize {
        self.reps_per_stim * self.n_stimuli
    }

    pub fn null_slots(&self) -> usize {
        self.trials().div_ceil(3)
    }

    /// Side of the simulated volume.
    pub fn volume_side(&self) -> usize {
        3 * self.d
    }

    pub fn signal_voxels(&self) -> usize {
        self.d.pow(3)
    }

    /// `n = ⌈(4/3 · ℓ · (ED + ISI) + t_end) / TR⌉`.
    pub fn scans(&self) -> usize {
        let l = self.trials() as f64;
        ((4.0 / 3.0 * l * (self.ed + self.isi) + self.t_end) / self.tr).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("d", self.d),
            ("reps_per_stim", self.reps_per_stim),
            ("n_stimuli", self.n_stimuli),
            ("runs", self.runs),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.trials() < 2 {
            return Err(Error::Config("need at least two trials per run".into()));
        }
        let positive = [
            ("tr", self.tr),
            ("ed", self.ed),
            ("isi", self.isi),
            ("fwhm_mm", self.fwhm_mm),
            ("fwhm_s", self.fwhm_s),
            ("t_end", self.t_end),
            ("voxel_mm[0]", self.voxel_mm[0]),
            ("voxel_mm[1]", self.voxel_mm[1]),
            ("voxel_mm[2]", self.voxel_mm[2]),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("sigma2_psi", self.sigma2_psi), ("sigma2_scanner", self.sigma2_scanner)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.v_offdiag > -1.0 / (self.signal_voxels() as f64 - 1.0).max(1.0) && self.v_offdiag < 1.0) {
            return Err(Error::Config(format!(
                "v_offdiag {} does not give a positive definite base matrix",
                self.v_offdiag
            )));
        }
        Ok(())
    }
}

/// A grid of designs sharing everything but ISI and signal variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FmriStudy {
    #[serde(flatten)]
    pub sim: SimConfig,
    pub isi_levels: Vec<f64>,
    pub sigma2_psi_levels: Vec<f64>,
    pub iterations: usize,
    pub theta_grid: Vec<f64>,
}

/// `{0}` followed by 41 log-spaced values from `1e-2` to `1e8`.
pub fn default_fmri_theta_grid() -> Vec<f64> {
    crate::harness::sweep::log_grid(-2.0, 8.0, 41)
}

impl Default for FmriStudy {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            isi_levels: vec![2.0, 3.0, 4.0],
            sigma2_psi_levels: vec![10.0, 15.0, 20.0],
            iterations: 100,
            theta_grid: default_fmri_theta_grid(),
        }
    }
}

impl FmriStudy {
    pub fn cells(&self) -> Vec<SimConfig> {
        let mut out = Vec::new();
        for &s in &self.sigma2_psi_levels {
            for &isi in &self.isi_levels {
                out.push(SimConfig {
                    isi,
                    sigma2_psi: s,
                    ..self.sim.clone()
                });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.isi_levels.is_empty() || self.sigma2_psi_levels.is_empty() {
            return Err(Error::Config("need at least one ISI and one sigma2_psi level".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        let grid = &self.theta_grid;
        if grid.len() < 2 || grid[0] != 0.0 {
            return Err(Error::Config("theta grid must start at 0 and have a positive value".into()));
        }
        if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("theta grid must be finite and strictly ascending".into()));
        }
        for cell in self.cells() {
            cell.validate()?;
        }
        Ok(())
    }
}
