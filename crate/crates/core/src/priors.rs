//! Prior weight vectors for ridge toward a prior.
//!
//! A [`PriorSpec`] carries the target vector together with the column scaling
//! the model must apply to its design. Only the TTB prior scales columns; the
//! scaling is stored with the prior so the same transform reaches both the
//! training fit and the test-time predictions.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristics::CueStats;
use crate::linear::{fit_shared_scalar, solve_ols, DesignMatrix};

/// Geometric base of the TTB column scaling.
pub const TTB_PHI: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Zero,
    Tal,
    Ttb,
    PermutedOls,
}

impl PriorKind {
    pub const ALL: [PriorKind; 4] = [
        PriorKind::Zero,
        PriorKind::Tal,
        PriorKind::Ttb,
        PriorKind::PermutedOls,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PriorKind::Zero => "zero",
            PriorKind::Tal => "tal",
            PriorKind::Ttb => "ttb",
            PriorKind::PermutedOls => "permuted_ols",
        }
    }
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PriorKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown prior kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub label: PriorKind,
    pub prior: Vec<f64>,
    /// Diagonal of the column scaling applied to the design (all ones unless TTB).
    pub transform: Vec<f64>,
    pub phi: f64,
    /// Set when the prior direction was undefined and the zero vector was used instead.
    #[serde(default)]
    pub degenerate: bool,
}

impl PriorSpec {
    pub fn m(&self) -> usize {
        self.prior.len()
    }

    pub fn prior_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.prior)
    }

    pub fn has_identity_transform(&self) -> bool {
        self.transform.iter().all(|&t| t == 1.0)
    }

    /// The design as seen by this prior's model.
    pub fn transform_design(&self, x: &DesignMatrix) -> Result<DesignMatrix> {
        if self.has_identity_transform() {
            if x.m() != self.m() {
                return Err(Error::DimensionMismatch(format!(
                    "prior has {} weights, design has {} columns",
                    self.m(),
                    x.m()
                )));
            }
            return Ok(x.clone());
        }
        x.scale_columns(&self.transform)
    }

    fn identity(label: PriorKind, prior: Vec<f64>) -> Self {
        let m = prior.len();
        Self {
            label,
            prior,
            transform: vec![1.0; m],
            phi: 1.0,
            degenerate: false,
        }
    }
}

pub fn zero_prior(m: usize) -> Result<PriorSpec> {
    if m == 0 {
        return Err(Error::invalid("a prior needs at least one weight"));
    }
    Ok(PriorSpec::identity(PriorKind::Zero, vec![0.0; m]))
}

/// `φ^{r̂_j}` per cue.
pub fn rank_scales(stats: &CueStats, phi: f64) -> Result<Vec<f64>> {
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::invalid(format!("phi must be positive, got {phi}")));
    }
    Ok(stats.ranks().iter().map(|&r| phi.powi(r as i32)).collect())
}

/// `X · diag(φ^r̂)`.
pub fn ttb_transform(x: &DesignMatrix, stats: &CueStats, phi: f64) -> Result<DesignMatrix> {
    x.scale_columns(&rank_scales(stats, phi)?)
}

/// Shared scale along `q̂`, or `None` when the direction carries no signal.
fn shared_scale(x: &DesignMatrix, y: &DVector<f64>, stats: &CueStats) -> Result<Option<f64>> {
    if stats.is_degenerate() {
        return Ok(None);
    }
    match fit_shared_scalar(x, y, &stats.direction_vector()) {
        Ok(s) => Ok(Some(s)),
        Err(Error::DegenerateDirection) => Ok(None),
        Err(e) => Err(e),
    }
}

fn signed_prior(stats: &CueStats, scale: Option<f64>) -> (Vec<f64>, bool) {
    match scale {
        Some(s) => (stats.directions().iter().map(|&q| q * s).collect(), false),
        None => (vec![0.0; stats.m()], true),
    }
}

/// `q̂ · ŝ` with `ŝ` the least-squares scale along `q̂`.
pub fn tal_prior(x: &DesignMatrix, y: &DVector<f64>, stats: &CueStats) -> Result<PriorSpec> {
    check_stats(x, stats)?;
    let (prior, degenerate) = signed_prior(stats, shared_scale(x, y, stats)?);
    Ok(PriorSpec {
        degenerate,
        ..PriorSpec::identity(PriorKind::Tal, prior)
    })
}

/// TTB prior and the transformed design `X_TTB` it must be paired with.
pub fn ttb_prior(
    x: &DesignMatrix,
    y: &DVector<f64>,
    stats: &CueStats,
) -> Result<(PriorSpec, DesignMatrix)> {
    check_stats(x, stats)?;
    let transform = rank_scales(stats, TTB_PHI)?;
    let x_ttb = x.scale_columns(&transform)?;
    let (prior, degenerate) = signed_prior(stats, shared_scale(&x_ttb, y, stats)?);
    let spec = PriorSpec {
        label: PriorKind::Ttb,
        prior,
        transform,
        phi: TTB_PHI,
        degenerate,
    };
    Ok((spec, x_ttb))
}

/// A uniformly random permutation of the OLS coefficients.
pub fn permuted_ols_prior<R: Rng + ?Sized>(
    x: &DesignMatrix,
    y: &DVector<f64>,
    rng: &mut R,
) -> Result<PriorSpec> {
    let mut w: Vec<f64> = solve_ols(x, y)?.iter().copied().collect();
    w.shuffle(rng);
    Ok(PriorSpec::identity(PriorKind::PermutedOls, w))
}

fn check_stats(x: &DesignMatrix, stats: &CueStats) -> Result<()> {
    if x.m() != stats.m() {
        return Err(Error::DimensionMismatch(format!(
            "stats describe {} cues, design has {}",
            stats.m(),
            x.m()
        )));
    }
    Ok(())
}
