//! Logistic regression penalized toward a prior.
//!
//! The fitted weights maximize
//!
//! ```text
//! ℓ(w) − ½ θ ‖w − w₀‖²,    ℓ(w) = Σᵢ yᵢ ηᵢ − log(1 + e^{ηᵢ}),  η = Xw
//! ```
//!
//! by damped Newton-Raphson with Hessian `XᵀSX + θI`, `S = diag(pᵢ(1 − pᵢ))`.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristics::CueStats;
use crate::linear::{check_theta, pseudo_inverse, DesignMatrix};
use crate::priors::{rank_scales, PriorKind, PriorSpec, TTB_PHI};

/// Ridge jitter on the one-dimensional scale fit; keeps the optimum finite
/// when the data are separable along the direction.
pub const SCALE_JITTER: f64 = 1e-4;

pub const MAX_NEWTON_ITERATIONS: usize = 100;

const MAX_HALVINGS: usize = 60;

/// Relative objective drop tolerated when accepting a step. Near the optimum
/// the objective is flat to rounding while the gradient is still above tolerance.
const ROUNDING_SLACK: f64 = 8.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy)]
pub struct LogisticProblem<'a> {
    pub design: &'a DesignMatrix,
    /// Outcomes in `{0, 1}`.
    pub labels: &'a DVector<f64>,
    pub prior: &'a DVector<f64>,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonTrace {
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub converged: bool,
}

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn log_likelihood_of(eta: &DVector<f64>, labels: &DVector<f64>) -> f64 {
    eta.iter()
        .zip(labels.iter())
        .map(|(&e, &y)| y * e - softplus(e))
        .sum()
}

fn check_labels(labels: &DVector<f64>, n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid(format!("labels must be 0 or 1, found {bad}")));
    }
    Ok(())
}

impl LogisticProblem<'_> {
    fn validate(&self) -> Result<()> {
        check_labels(self.labels, self.design.n())?;
        if self.prior.len() != self.design.m() {
            return Err(Error::DimensionMismatch(format!(
                "prior has length {}, design has {} columns",
                self.prior.len(),
                self.design.m()
            )));
        }
        if self.prior.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prior"));
        }
        check_theta(self.theta)
    }

    pub fn log_likelihood(&self, w: &DVector<f64>) -> f64 {
        log_likelihood_of(&(self.design.as_matrix() * w), self.labels)
    }

    /// The penalized log-likelihood being maximized.
    pub fn objective(&self, w: &DVector<f64>) -> f64 {
        self.log_likelihood(w) - 0.5 * self.theta * (w - self.prior).norm_squared()
    }

    pub fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        let x = self.design.as_matrix();
        let resid = (x * w).map(sigmoid);
        let resid = self.labels - resid;
        x.tr_mul(&resid) - (w - self.prior) * self.theta
    }

    /// Negative Hessian of the objective, `XᵀSX + θI`.
    pub fn curvature(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let x = self.design.as_matrix();
        let s = (x * w).map(|e| {
            let p = sigmoid(e);
            p * (1.0 - p)
        });
        let mut weighted = x.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= s[i];
        }
        let mut h = x.tr_mul(&weighted);
        for j in 0..h.ncols() {
            h[(j, j)] += self.theta;
        }
        h
    }

    pub fn gradient_tolerance(&self) -> f64 {
        1e-8 * (1.0 + self.design.n() as f64)
    }
}

fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    match Cholesky::new(h.clone()) {
        Some(chol) => Ok(chol.solve(g)),
        None => {
            let (inv, _) = pseudo_inverse(&h)?;
            Ok(inv * g)
        }
    }
}

/// Damped Newton from the prior.
pub fn fit_logistic_ridge(p: &LogisticProblem<'_>) -> Result<(DVector<f64>, NewtonTrace)> {
    fit_logistic_ridge_from(p, p.prior.clone())
}

/// Damped Newton from an explicit starting point.
///
/// Stops once `‖∇‖ < 1e-8 (1 + n)` or after [`MAX_NEWTON_ITERATIONS`]
/// iterations. Separable data at `θ = 0` has no finite optimum; such fits
/// come back with `converged == false`.
pub fn fit_logistic_ridge_from(
    p: &LogisticProblem<'_>,
    init: DVector<f64>,
) -> Result<(DVector<f64>, NewtonTrace)> {
    p.validate()?;
    if init.len() != p.design.m() {
        return Err(Error::DimensionMismatch("starting point length".into()));
    }
    let tol = p.gradient_tolerance();
    let mut w = init;
    let mut f = p.objective(&w);
    if !f.is_finite() {
        return Err(Error::Numerical("non-finite objective at the starting point".into()));
    }
    let mut g = p.gradient(&w);
    let mut iterations = 0;
    while iterations < MAX_NEWTON_ITERATIONS && g.norm() >= tol {
        let step = newton_direction(p.curvature(&w), &g)?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = &w + &step * t;
            let fc = p.objective(&candidate);
            if fc.is_nan() {
                return Err(Error::Numerical("objective became NaN".into()));
            }
            if fc >= f - ROUNDING_SLACK * (1.0 + f.abs()) {
                accepted = Some((candidate, fc));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((wn, fnew)) => {
                w = wn;
                f = fnew;
                g = p.gradient(&w);
            }
            // No ascent along the Newton direction at machine precision.
            None => break,
        }
    }
    let final_gradient_norm = g.norm();
    Ok((
        w,
        NewtonTrace {
            iterations,
            final_gradient_norm,
            converged: final_gradient_norm < tol,
        },
    ))
}

/// Maximum-likelihood scale `s` for weights constrained to `s · q`, with a
/// `½ ε s²` jitter (`ε =` [`SCALE_JITTER`]).
pub fn fit_logistic_scale(x: &DesignMatrix, labels: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
    check_labels(labels, x.n())?;
    if q.len() != x.m() {
        return Err(Error::DimensionMismatch(format!(
            "direction has length {}, design has {} columns",
            q.len(),
            x.m()
        )));
    }
    let z = x.as_matrix() * q;
    if z.norm_squared() <= f64::MIN_POSITIVE {
        return Err(Error::DegenerateDirection);
    }
    let objective = |s: f64| log_likelihood_of(&(&z * s), labels) - 0.5 * SCALE_JITTER * s * s;
    let tol = 1e-12 * (1.0 + x.n() as f64);
    let mut s = 0.0;
    let mut f = objective(s);
    for _ in 0..200 {
        let mut grad = -SCALE_JITTER * s;
        let mut curv = SCALE_JITTER;
        for (&zi, &yi) in z.iter().zip(labels.iter()) {
            let pi = sigmoid(s * zi);
            grad += (yi - pi) * zi;
            curv += pi * (1.0 - pi) * zi * zi;
        }
        if grad.abs() < tol {
            break;
        }
        let step = grad / curv;
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..MAX_HALVINGS {
            let cand = s + t * step;
            let fc = objective(cand);
            if fc >= f - ROUNDING_SLACK * (1.0 + f.abs()) {
                s = cand;
                f = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if !s.is_finite() {
        return Err(Error::Numerical("logistic scale diverged".into()));
    }
    Ok(s)
}

/// `q · |scale|`, labelled as a TAL-shaped prior with identity transform.
pub fn logistic_prior(scale: f64, q: &DVector<f64>) -> PriorSpec {
    let m = q.len();
    PriorSpec {
        label: PriorKind::Tal,
        prior: q.iter().map(|&qj| qj * scale.abs()).collect(),
        transform: vec![1.0; m],
        phi: 1.0,
        degenerate: false,
    }
}

fn scale_or_degenerate(x: &DesignMatrix, labels: &DVector<f64>, stats: &CueStats) -> Result<Option<f64>> {
    if stats.is_degenerate() {
        return Ok(None);
    }
    match fit_logistic_scale(x, labels, &stats.direction_vector()) {
        Ok(s) => Ok(Some(s)),
        Err(Error::DegenerateDirection) => Ok(None),
        Err(e) => Err(e),
    }
}

/// TAL prior for the logistic model, `q̂ |ŝ_log|`.
pub fn logistic_tal_prior(x: &DesignMatrix, labels: &DVector<f64>, stats: &CueStats) -> Result<PriorSpec> {
    let q = stats.direction_vector();
    Ok(match scale_or_degenerate(x, labels, stats)? {
        Some(s) => logistic_prior(s, &q),
        None => PriorSpec {
            degenerate: true,
            ..logistic_prior(0.0, &q)
        },
    })
}

/// TTB prior for the logistic model: the scale is fitted on `X_TTB`.
pub fn logistic_ttb_prior(
    x: &DesignMatrix,
    labels: &DVector<f64>,
    stats: &CueStats,
) -> Result<(PriorSpec, DesignMatrix)> {
    let transform = rank_scales(stats, TTB_PHI)?;
    let x_ttb = x.scale_columns(&transform)?;
    let q = stats.direction_vector();
    let (scale, degenerate) = match scale_or_degenerate(&x_ttb, labels, stats)? {
        Some(s) => (s, false),
        None => (0.0, true),
    };
    let spec = PriorSpec {
        label: PriorKind::Ttb,
        transform,
        phi: TTB_PHI,
        degenerate,
        ..logistic_prior(scale, &q)
    };
    Ok((spec, x_ttb))
}

/// `1 / (1 + e^{−x·w})`.
pub fn predict_proba(w: &DVector<f64>, x: &[f64]) -> f64 {
    let eta: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
    sigmoid(eta)
}
