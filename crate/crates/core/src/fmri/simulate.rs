//! Full scenes: design, ground truth and noisy voxel time series.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::SimConfig;
use super::design::{build_design_lsa, EventSchedule};
use super::smoothing::{axis_kernels, smooth_volume};
use super::truth::{embed, sample_ground_truth, sample_run, signal_voxel_indices, GroundTruth};
use crate::error::{Error, Result};
use crate::linear::DesignMatrix;

/// One simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct FmriScene {
    pub schedule: EventSchedule,
    pub x_lsa: DesignMatrix,
    /// `ℓ × d³` trial weights of the signal voxels.
    pub psi: DMatrix<f64>,
    pub stimuli: Vec<usize>,
    /// `ℓ × (3d)³`, zero outside the signal cube.
    pub omega: DMatrix<f64>,
    /// `n × (3d)³` observed series, `X Ω + smoothed noise`.
    pub y: DMatrix<f64>,
    pub effect_center: [usize; 3],
    /// Column of `y` holding each signal voxel.
    pub signal_columns: Vec<usize>,
}

impl FmriScene {
    /// `n × d³`: the observed series of the signal voxels only.
    pub fn signal_series(&self) -> DMatrix<f64> {
        self.y.select_columns(&self.signal_columns)
    }
}

/// Smoothed scanner noise for one run, `n × (3d)³`.
///
/// The white noise is drawn on a grid padded by each kernel's radius and
/// cropped after smoothing, so every kept sample sees a full kernel and
/// the noise variance is the same at the edges as in the middle.
pub fn sample_noise<R: Rng + ?Sized>(cfg: &SimConfig, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let side = cfg.volume_side();
    sample_noise_region(cfg, n, rng, [0; 3], [side; 3])
}

/// The voxels `lo..hi` (per axis, row-major) of the same noise field as
/// [`sample_noise`]: the random stream is consumed identically and the
/// values are bit-for-bit those of the full volume.
pub fn sample_noise_region<R: Rng + ?Sized>(
    cfg: &SimConfig,
    n: usize,
    rng: &mut R,
    lo: [usize; 3],
    hi: [usize; 3],
) -> Result<DMatrix<f64>> {
    let side = cfg.volume_side();
    if (0..3).any(|a| lo[a] >= hi[a] || hi[a] > side) {
        return Err(Error::invalid(format!("noise region {lo:?}..{hi:?} outside a volume of side {side}")));
    }
    let sd = cfg.sigma2_scanner.sqrt();
    let kernels = axis_kernels(cfg);
    let pad = kernels.clone().map(|k| k.len() / 2);
    let full = [n + 2 * pad[0], side + 2 * pad[1], side + 2 * pad[2], side + 2 * pad[3]];
    let at = |dims: &[usize; 4], t: usize, x: usize, y: usize, z: usize| t + dims[0] * (z + dims[3] * (y + dims[2] * x));
    let field: Vec<f64> = (0..full.iter().product::<usize>())
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        })
        .collect();
    // Everything within a kernel radius of the region, in padded coordinates.
    let ext = [full[0], hi[0] - lo[0] + 2 * pad[1], hi[1] - lo[1] + 2 * pad[2], hi[2] - lo[2] + 2 * pad[3]];
    let mut block = vec![0.0; ext.iter().product()];
    for x in 0..ext[1] {
        for y in 0..ext[2] {
            for z in 0..ext[3] {
                let src = at(&full, 0, lo[0] + x, lo[1] + y, lo[2] + z);
                let dst = at(&ext, 0, x, y, z);
                block[dst..dst + ext[0]].copy_from_slice(&field[src..src + ext[0]]);
            }
        }
    }
    smooth_volume(&mut block, ext, &kernels);
    let (wx, wy, wz) = (hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]);
    let mut e = DMatrix::zeros(n, wx * wy * wz);
    for x in 0..wx {
        for y in 0..wy {
            for z in 0..wz {
                let src = at(&ext, pad[0], x + pad[1], y + pad[2], z + pad[3]);
                e.column_mut((x * wy + y) * wz + z)
                    .copy_from_slice(&block[src..src + n]);
            }
        }
    }
    Ok(e)
}

/// The parts of a run the estimators need: design, truth and the signal
/// voxels' series.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRun {
    pub x_lsa: DesignMatrix,
    pub psi: DMatrix<f64>,
    /// `n × d³`, equal to [`FmriScene::signal_series`] of the same draw.
    pub y: DMatrix<f64>,
}

/// Same draws as [`simulate_run`], keeping only the signal voxels.
pub fn simulate_signal_run<R: Rng + ?Sized>(cfg: &SimConfig, truth: &GroundTruth, rng: &mut R) -> Result<SignalRun> {
    let schedule = EventSchedule::random(cfg, rng);
    let x_lsa = build_design_lsa(cfg, &schedule)?;
    let run = sample_run(cfg, truth, rng);
    let lo = truth.effect_center.map(|c| c - 1);
    let hi = lo.map(|c| c + cfg.d);
    let noise = sample_noise_region(cfg, x_lsa.n(), rng, lo, hi)?;
    let y = noise + x_lsa.as_matrix() * &run.psi;
    Ok(SignalRun { x_lsa, psi: run.psi, y })
}

/// Ground truth shared across runs, then `cfg.runs` signal-only runs.
pub fn simulate_signal<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<Vec<SignalRun>> {
    let truth = sample_ground_truth(cfg, rng)?;
    (0..cfg.runs).map(|_| simulate_signal_run(cfg, &truth, rng)).collect()
}

pub fn simulate_run<R: Rng + ?Sized>(cfg: &SimConfig, truth: &GroundTruth, rng: &mut R) -> Result<FmriScene> {
    let schedule = EventSchedule::random(cfg, rng);
    let x_lsa = build_design_lsa(cfg, &schedule)?;
    let run = sample_run(cfg, truth, rng);
    let mut y = sample_noise(cfg, x_lsa.n(), rng)?;
    let signal_columns = signal_voxel_indices(cfg, truth.effect_center);
    let signal = x_lsa.as_matrix() * &run.psi;
    for (j, &c) in signal_columns.iter().enumerate() {
        let mut col = y.column_mut(c);
        col += signal.column(j);
    }
    Ok(FmriScene {
        omega: embed(cfg, &run.psi, truth.effect_center),
        schedule,
        x_lsa,
        psi: run.psi,
        stimuli: run.stimuli,
        y,
        effect_center: truth.effect_center,
        signal_columns,
    })
}

/// Ground truth shared across runs, then `cfg.runs` independent scenes.
pub fn simulate<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<Vec<FmriScene>> {
    let truth = sample_ground_truth(cfg, rng)?;
    (0..cfg.runs).map(|_| simulate_run(cfg, &truth, rng)).collect()
}
