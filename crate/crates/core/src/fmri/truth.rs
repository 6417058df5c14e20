//! Ground-truth trial weights with correlated signal voxels.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::config::SimConfig;
use crate::error::{Error, Result};

/// Draws allowed for a usable Wishart factor.
pub const MAX_WISHART_RESAMPLES: usize = 10;

/// Largest 1-based effect-center coordinate.
pub const MAX_EFFECT_CENTER: usize = 11;

/// Cholesky factor of `V = (1 − ρ) I + ρ 11ᵀ`.
pub fn base_factor(dim: usize, offdiag: f64) -> Result<DMatrix<f64>> {
    let v = DMatrix::from_fn(dim, dim, |i, j| if i == j { 1.0 } else { offdiag });
    v.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Numerical("Wishart base matrix is not positive definite".into()))
}

/// Lower-triangular `F` with `F Fᵀ ~ W(V, df) / df`, via the Bartlett
/// decomposition `F = L A / √df`. `F` is the Cholesky factor of the draw.
pub fn sample_wishart_factor<R: Rng + ?Sized>(
    base: &DMatrix<f64>,
    df: usize,
    rng: &mut R,
) -> Result<(DMatrix<f64>, usize)> {
    let p = base.nrows();
    if df < p {
        return Err(Error::invalid(format!("Wishart needs df >= {p}, got {df}")));
    }
    for attempt in 0..MAX_WISHART_RESAMPLES {
        let mut a = DMatrix::zeros(p, p);
        for i in 0..p {
            let chi = ChiSquared::new((df - i) as f64).map_err(|e| Error::Numerical(e.to_string()))?;
            a[(i, i)] = chi.sample(rng).sqrt();
            for j in 0..i {
                a[(i, j)] = StandardNormal.sample(rng);
            }
        }
        let f = base * a / (df as f64).sqrt();
        let diag = f.diagonal();
        let (lo, hi) = (diag.min(), diag.max());
        if diag.iter().all(|v| v.is_finite()) && lo > hi * 1e-10 {
            return Ok((f, attempt));
        }
    }
    Err(Error::Numerical(format!(
        "no positive definite covariance after {MAX_WISHART_RESAMPLES} draws"
    )))
}

/// What stays fixed across the runs of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// One mean per stimulus, each of length `d³`.
    pub means: Vec<DVector<f64>>,
    /// Cholesky factor of the voxel covariance `Σ`.
    pub covariance_factor: DMatrix<f64>,
    /// 1-based corner of the signal cube inside the volume.
    pub effect_center: [usize; 3],
    pub wishart_resamples: usize,
}

impl GroundTruth {
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.covariance_factor * self.covariance_factor.transpose()
    }
}

/// Trial weights for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTruth {
    /// Stimulus index of each trial, in presentation order.
    pub stimuli: Vec<usize>,
    /// `ℓ × d³`; voxel `(x, y, z)` is column `(x d + y) d + z`.
    pub psi: DMatrix<f64>,
}

pub fn sample_ground_truth<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<GroundTruth> {
    cfg.validate()?;
    let v = cfg.signal_voxels();
    let sd = cfg.sigma2_psi.sqrt();
    let means = (0..cfg.n_stimuli)
        .map(|_| DVector::from_fn(v, |_, _| sd * Distribution::<f64>::sample(&StandardNormal, rng)))
        .collect();
    let base = base_factor(v, cfg.v_offdiag)?;
    let (covariance_factor, wishart_resamples) = sample_wishart_factor(&base, v, rng)?;
    let hi = MAX_EFFECT_CENTER.min(2 * cfg.d + 1);
    let effect_center = [rng.random_range(1..=hi), rng.random_range(1..=hi), rng.random_range(1..=hi)];
    Ok(GroundTruth {
        means,
        covariance_factor,
        effect_center,
        wishart_resamples,
    })
}

/// `ℓ/𝗌` draws from `N(μ_s, Σ)` per stimulus, rows shuffled over trials.
pub fn sample_run<R: Rng + ?Sized>(cfg: &SimConfig, truth: &GroundTruth, rng: &mut R) -> RunTruth {
    let v = cfg.signal_voxels();
    let blocks: Vec<usize> = (0..cfg.n_stimuli)
        .flat_map(|s| std::iter::repeat_n(s, cfg.reps_per_stim))
        .collect();
    let draws: Vec<DVector<f64>> = blocks
        .iter()
        .map(|&s| {
            let z = DVector::from_fn(v, |_, _| StandardNormal.sample(rng));
            &truth.means[s] + &truth.covariance_factor * z
        })
        .collect();
    let mut order: Vec<usize> = (0..draws.len()).collect();
    order.shuffle(rng);
    let mut psi = DMatrix::zeros(order.len(), v);
    for (k, &i) in order.iter().enumerate() {
        psi.row_mut(k).tr_copy_from(&draws[i]);
    }
    let stimuli = order.iter().map(|&i| blocks[i]).collect();
    RunTruth { stimuli, psi }
}

/// Volume voxel index of each signal voxel, in signal-voxel order.
pub fn signal_voxel_indices(cfg: &SimConfig, center: [usize; 3]) -> Vec<usize> {
    let (d, side) = (cfg.d, cfg.volume_side());
    let mut idx = Vec::with_capacity(d * d * d);
    for x in 0..d {
        for y in 0..d {
            for z in 0..d {
                let (vx, vy, vz) = (center[0] - 1 + x, center[1] - 1 + y, center[2] - 1 + z);
                idx.push((vx * side + vy) * side + vz);
            }
        }
    }
    idx
}

/// `Ω`: `ℓ × (3d)³`, zero outside the signal cube.
pub fn embed(cfg: &SimConfig, psi: &DMatrix<f64>, center: [usize; 3]) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(psi.nrows(), cfg.volume_side().pow(3));
    for (j, &col) in signal_voxel_indices(cfg, center).iter().enumerate() {
        omega.set_column(col, &psi.column(j));
    }
    omega
}
