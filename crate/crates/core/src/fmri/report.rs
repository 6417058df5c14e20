//! RMSE scoring, study runs and their CSV/binary outputs.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{FmriStudy, SimConfig};
use super::estimate::lss_batch;
use super::simulate::{simulate_signal, FmriScene, SignalRun};
use crate::linear::RidgeBatch;
use crate::error::{Error, Result};
use crate::harness::sweep::{iteration_rng, mean_sd};

/// Per-voxel RMSE over trials, averaged over voxels. Both inputs are `ℓ × voxels`.
pub fn score_rmse(estimates: &DMatrix<f64>, psi: &DMatrix<f64>) -> Result<f64> {
    if estimates.shape() != psi.shape() || psi.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "estimates {:?}, truth {:?}",
            estimates.shape(),
            psi.shape()
        )));
    }
    let l = psi.nrows() as f64;
    let total: f64 = estimates
        .column_iter()
        .zip(psi.column_iter())
        .map(|(e, p)| ((e - p).norm_squared() / l).sqrt())
        .sum();
    Ok(total / psi.ncols() as f64)
}

/// RMSE of each estimator for one iteration, averaged over runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationScores {
    pub lsa: f64,
    pub lss: f64,
    /// One value per grid penalty.
    pub lss_prior: Vec<f64>,
    /// Rank-deficient per-trial LSS designs across runs.
    pub lss_flagged: usize,
}

pub fn score_scenes(scenes: &[FmriScene], theta_grid: &[f64]) -> Result<IterationScores> {
    let runs: Vec<SignalRun> = scenes
        .iter()
        .map(|s| SignalRun { x_lsa: s.x_lsa.clone(), psi: s.psi.clone(), y: s.signal_series() })
        .collect();
    score_runs(&runs, theta_grid)
}

pub fn score_runs(runs: &[SignalRun], theta_grid: &[f64]) -> Result<IterationScores> {
    let mut lsa = 0.0;
    let mut lss = 0.0;
    let mut prior = vec![0.0; theta_grid.len()];
    let mut flagged = 0;
    for run in runs {
        let batch = RidgeBatch::new(&run.x_lsa, &run.y)?;
        let w_lsa = batch.solve(&DMatrix::zeros(run.x_lsa.m(), run.y.ncols()), 0.0)?;
        let (w_lss, f) = lss_batch(&run.x_lsa, &run.y)?;
        flagged += f;
        lsa += score_rmse(&w_lsa, &run.psi)?;
        lss += score_rmse(&w_lss, &run.psi)?;
        for (slot, &theta) in prior.iter_mut().zip(theta_grid) {
            let w = batch.solve(&w_lss, theta)?;
            *slot += score_rmse(&w, &run.psi)?;
        }
    }
    let r = runs.len() as f64;
    Ok(IterationScores {
        lsa: lsa / r,
        lss: lss / r,
        lss_prior: prior.into_iter().map(|v| v / r).collect(),
        lss_flagged: flagged,
    })
}

/// Scores for one iteration. Only the signal voxels are simulated in
/// full; the random draws match [`simulate`] with the same stream.
pub fn run_iteration(cfg: &SimConfig, theta_grid: &[f64], iteration: usize) -> Result<IterationScores> {
    let mut rng = iteration_rng(cfg.seed, iteration);
    let runs = simulate_signal(cfg, &mut rng)?;
    score_runs(&runs, theta_grid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mean_rmse: f64,
    pub sd_rmse: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        let (mean_rmse, sd_rmse) = mean_sd(values);
        Self { mean_rmse, sd_rmse }
    }

    /// Standard error of the mean over `iterations`.
    pub fn standard_error(&self, iterations: usize) -> f64 {
        self.sd_rmse / (iterations as f64).sqrt()
    }
}

/// Results for one (ISI, σ²_Ψ) design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub isi: f64,
    pub sigma2_psi: f64,
    pub lsa: Summary,
    pub lss: Summary,
    pub theta_grid: Vec<f64>,
    pub lss_prior: Vec<Summary>,
    #[serde(skip)]
    pub raw: Vec<IterationScores>,
}

impl CellReport {
    pub fn iterations(&self) -> usize {
        self.raw.len()
    }

    /// Index into the grid of the lowest mean LSS-prior RMSE.
    pub fn best_theta_index(&self) -> usize {
        self.lss_prior
            .iter()
            .enumerate()
            .fold(0, |b, (i, s)| if s.mean_rmse < self.lss_prior[b].mean_rmse { i } else { b })
    }
}

pub fn run_cell(cfg: &SimConfig, theta_grid: &[f64], iterations: usize) -> Result<CellReport> {
    cfg.validate()?;
    let raw = (0..iterations)
        .into_par_iter()
        .map(|it| run_iteration(cfg, theta_grid, it))
        .collect::<Result<Vec<_>>>()?;
    let column = |f: &dyn Fn(&IterationScores) -> f64| raw.iter().map(f).collect::<Vec<_>>();
    let lss_prior = (0..theta_grid.len())
        .map(|t| Summary::of(&column(&|s| s.lss_prior[t])))
        .collect();
    Ok(CellReport {
        isi: cfg.isi,
        sigma2_psi: cfg.sigma2_psi,
        lsa: Summary::of(&column(&|s| s.lsa)),
        lss: Summary::of(&column(&|s| s.lss)),
        theta_grid: theta_grid.to_vec(),
        lss_prior,
        raw,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub study: FmriStudy,
    pub cells: Vec<CellReport>,
}

impl EstimatorReport {
    pub fn cell(&self, isi: f64, sigma2_psi: f64) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.isi == isi && c.sigma2_psi == sigma2_psi)
    }

    /// `isi, sigma2_psi, estimator, theta, mean_rmse, sd_rmse`; LSA is
    /// reported at θ = 0 and LSS at θ = inf.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["isi", "sigma2_psi", "estimator", "theta", "mean_rmse", "sd_rmse"])?;
        for c in &self.cells {
            let mut row = |name: &str, theta: String, s: &Summary| {
                w.write_record([
                    c.isi.to_string(),
                    c.sigma2_psi.to_string(),
                    name.to_string(),
                    theta,
                    s.mean_rmse.to_string(),
                    s.sd_rmse.to_string(),
                ])
            };
            row("lsa", "0".into(), &c.lsa)?;
            row("lss", "inf".into(), &c.lss)?;
            for (theta, s) in c.theta_grid.iter().zip(&c.lss_prior) {
                row("lss_prior", theta.to_string(), s)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// One row per iteration and estimator.
    pub fn write_raw_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["isi", "sigma2_psi", "iteration", "estimator", "theta", "rmse"])?;
        for c in &self.cells {
            for (it, s) in c.raw.iter().enumerate() {
                let mut row = |name: &str, theta: String, v: f64| {
                    w.write_record([
                        c.isi.to_string(),
                        c.sigma2_psi.to_string(),
                        it.to_string(),
                        name.to_string(),
                        theta,
                        v.to_string(),
                    ])
                };
                row("lsa", "0".into(), s.lsa)?;
                row("lss", "inf".into(), s.lss)?;
                for (theta, v) in c.theta_grid.iter().zip(&s.lss_prior) {
                    row("lss_prior", theta.to_string(), *v)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn run_study(study: &FmriStudy) -> Result<EstimatorReport> {
    study.validate()?;
    let cells = study
        .cells()
        .iter()
        .map(|cfg| run_cell(cfg, &study.theta_grid, study.iterations))
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimatorReport {
        study: study.clone(),
        cells,
    })
}

/// Writes one array: `u64` LE rank, `u64` LE extents, then row-major `f64` LE values.
pub fn write_array<W: Write>(mut out: W, dims: &[usize], values: impl IntoIterator<Item = f64>) -> Result<()> {
    out.write_all(&(dims.len() as u64).to_le_bytes())?;
    for &d in dims {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    let expected: usize = dims.iter().product();
    let mut count = 0;
    for v in values {
        out.write_all(&v.to_le_bytes())?;
        count += 1;
    }
    if count != expected {
        return Err(Error::DimensionMismatch(format!("{count} values for dims {dims:?}")));
    }
    Ok(())
}

/// Design matrix (`n × ℓ`) of a scene in the flat binary layout.
pub fn write_scene_design<W: Write>(out: W, scene: &FmriScene) -> Result<()> {
    let x = scene.x_lsa.as_matrix();
    let values = (0..x.nrows()).flat_map(|i| (0..x.ncols()).map(move |j| x[(i, j)]));
    write_array(out, &[x.nrows(), x.ncols()], values)
}

/// Ground truth `Ψ` (`ℓ × d × d × d`) of a scene in the flat binary layout.
pub fn write_scene_psi<W: Write>(out: W, scene: &FmriScene, d: usize) -> Result<()> {
    let psi = &scene.psi;
    let values = (0..psi.nrows()).flat_map(|k| (0..psi.ncols()).map(move |v| psi[(k, v)]));
    write_array(out, &[psi.nrows(), d, d, d], values)
}

/// Reads an array written by [`write_array`].
pub fn read_array(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f64>)> {
    let word = |i: usize| -> Result<[u8; 8]> {
        bytes
            .get(8 * i..8 * i + 8)
            .and_then(|s| s.try_into().ok())
            .ok_or_else(|| Error::invalid("truncated array"))
    };
    let rank = u64::from_le_bytes(word(0)?) as usize;
    let dims = (0..rank)
        .map(|i| word(1 + i).map(|w| u64::from_le_bytes(w) as usize))
        .collect::<Result<Vec<_>>>()?;
    let count: usize = dims.iter().product();
    let values = (0..count)
        .map(|i| word(1 + rank + i).map(f64::from_le_bytes))
        .collect::<Result<Vec<_>>>()?;
    if bytes.len() != 8 * (1 + rank + count) {
        return Err(Error::invalid("trailing bytes after array"));
    }
    Ok((dims, values))
}
