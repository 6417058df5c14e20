//! Closed-form least squares and ridge regression toward a prior.
//!
//! Every estimator in the crate reduces to one of two solves:
//!
//! * ordinary least squares, `argmin ‖y − Xw‖²`, computed through the SVD so
//!   that rank-deficient designs get the minimum-norm solution;
//! * ridge with a prior, `argmin ‖y − Xw‖² + θ‖w − w₀‖²`, whose normal
//!   equations `(XᵀX + θI) w = Xᵀy + θw₀` are solved by Cholesky.
//!
//! No intercept is ever added and predictors are used as given.

use std::ops::Deref;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below `RCOND · σ_max` are treated as zero.
pub const RCOND: f64 = 1e-10;

pub type WeightVector = DVector<f64>;

/// An `n × m` design with finite entries and `n, m ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix(DMatrix<f64>);

impl DesignMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::invalid(format!(
                "design matrix must be at least 1x1, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        Ok(Self(values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn m(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Returns `X · diag(scale)`.
    pub fn scale_columns(&self, scale: &[f64]) -> Result<Self> {
        if scale.len() != self.m() {
            return Err(Error::DimensionMismatch(format!(
                "{} column scales for {} columns",
                scale.len(),
                self.m()
            )));
        }
        let mut out = self.0.clone();
        for (j, &s) in scale.iter().enumerate() {
            out.column_mut(j).scale_mut(s);
        }
        Self::new(out)
    }

    /// Keeps the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::new(self.0.select_rows(rows.iter()))
    }
}

impl Deref for DesignMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// The inputs of one ridge-with-prior solve.
#[derive(Debug, Clone, Copy)]
pub struct RidgeProblem<'a> {
    pub design: &'a DesignMatrix,
    pub response: &'a DVector<f64>,
    pub prior: &'a DVector<f64>,
    pub theta: f64,
}

impl RidgeProblem<'_> {
    fn validate(&self) -> Result<()> {
        check_response(self.design, self.response)?;
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

    /// Value of `‖y − Xw‖² + θ‖w − w₀‖²`.
    pub fn objective(&self, w: &DVector<f64>) -> f64 {
        let resid = self.response - self.design.as_matrix() * w;
        resid.norm_squared() + self.theta * (w - self.prior).norm_squared()
    }

    /// Gradient `2Xᵀ(Xw − y) + 2θ(w − w₀)`.
    pub fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        let x = self.design.as_matrix();
        let resid = x * w - self.response;
        (x.tr_mul(&resid) + (w - self.prior) * self.theta) * 2.0
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("penalty"));
    }
    if theta < 0.0 {
        return Err(Error::invalid(format!("penalty must be >= 0, got {theta}")));
    }
    Ok(())
}

fn check_response(x: &DesignMatrix, y: &DVector<f64>) -> Result<()> {
    if y.len() != x.n() {
        return Err(Error::DimensionMismatch(format!(
            "response has length {}, design has {} rows",
            y.len(),
            x.n()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response"));
    }
    Ok(())
}

/// Moore-Penrose pseudoinverse with the relative cutoff [`RCOND`].
///
/// Also returns the numerical rank.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, usize)> {
    let svd = a.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Numerical("SVD did not produce U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not produce Vᵀ".into()))?;
    let sigma = svd.singular_values;
    let sigma_max = sigma.iter().copied().fold(0.0_f64, f64::max);
    let cutoff = RCOND * sigma_max;

    let k = sigma.len();
    let mut rank = 0;
    // V Σ⁺ Uᵀ, built as (Σ⁺ Uᵀ) scaled row-wise then multiplied by V.
    let mut scaled_ut = u.transpose();
    for i in 0..k {
        let s = sigma[i];
        if s > cutoff && s > 0.0 {
            rank += 1;
            scaled_ut.row_mut(i).scale_mut(1.0 / s);
        } else {
            scaled_ut.row_mut(i).fill(0.0);
        }
    }
    Ok((v_t.tr_mul(&scaled_ut), rank))
}

/// Minimum-norm least squares along with the numerical rank of `X`.
pub fn solve_ols_with_rank(x: &DesignMatrix, y: &DVector<f64>) -> Result<(WeightVector, usize)> {
    check_response(x, y)?;
    let (pinv, rank) = pseudo_inverse(x.as_matrix())?;
    Ok((pinv * y, rank))
}

/// `argmin_w ‖y − Xw‖²`, minimum-norm when `XᵀX` is singular.
pub fn solve_ols(x: &DesignMatrix, y: &DVector<f64>) -> Result<WeightVector> {
    solve_ols_with_rank(x, y).map(|(w, _)| w)
}

/// `(XᵀX + θI)⁻¹(Xᵀy + θw₀)`; at `θ = 0` this is exactly [`solve_ols`].
pub fn solve_ridge_with_prior(p: &RidgeProblem<'_>) -> Result<WeightVector> {
    p.validate()?;
    if p.theta == 0.0 {
        return solve_ols(p.design, p.response);
    }
    let y = DMatrix::from_column_slice(p.response.len(), 1, p.response.as_slice());
    let prior = DMatrix::from_column_slice(p.prior.len(), 1, p.prior.as_slice());
    let w = ridge_normal_solve(p.design.as_matrix(), &y, &prior, p.theta)?;
    Ok(w.column(0).into_owned())
}

/// Ridge toward a prior for many responses at once.
///
/// `responses` is `n × k` and `priors` is `m × k`; column `c` of the result
/// solves the problem for column `c` of both. `θ = 0` falls back to the
/// pseudoinverse.
pub fn solve_ridge_batch(
    x: &DesignMatrix,
    responses: &DMatrix<f64>,
    priors: &DMatrix<f64>,
    theta: f64,
) -> Result<DMatrix<f64>> {
    check_theta(theta)?;
    if responses.nrows() != x.n() || priors.nrows() != x.m() || priors.ncols() != responses.ncols()
    {
        return Err(Error::DimensionMismatch(format!(
            "design {}x{}, responses {}x{}, priors {}x{}",
            x.n(),
            x.m(),
            responses.nrows(),
            responses.ncols(),
            priors.nrows(),
            priors.ncols()
        )));
    }
    if theta == 0.0 {
        let (pinv, _) = pseudo_inverse(x.as_matrix())?;
        return Ok(pinv * responses);
    }
    ridge_normal_solve(x.as_matrix(), responses, priors, theta)
}

/// One design and response matrix solved at many penalties. `XᵀX`, `Xᵀy`
/// and the pseudoinverse solution are formed once.
#[derive(Debug, Clone)]
pub struct RidgeBatch {
    gram: DMatrix<f64>,
    xty: DMatrix<f64>,
    unpenalized: DMatrix<f64>,
}

impl RidgeBatch {
    pub fn new(x: &DesignMatrix, responses: &DMatrix<f64>) -> Result<Self> {
        if responses.nrows() != x.n() {
            return Err(Error::DimensionMismatch(format!(
                "design {}x{}, responses {}x{}",
                x.n(),
                x.m(),
                responses.nrows(),
                responses.ncols()
            )));
        }
        let (pinv, _) = pseudo_inverse(x.as_matrix())?;
        Ok(Self {
            gram: x.as_matrix().tr_mul(x.as_matrix()),
            xty: x.as_matrix().tr_mul(responses),
            unpenalized: pinv * responses,
        })
    }

    /// Same result as [`solve_ridge_batch`] on the stored design and responses.
    pub fn solve(&self, priors: &DMatrix<f64>, theta: f64) -> Result<DMatrix<f64>> {
        check_theta(theta)?;
        if priors.shape() != (self.gram.nrows(), self.xty.ncols()) {
            return Err(Error::DimensionMismatch(format!(
                "priors {:?}, expected {:?}",
                priors.shape(),
                (self.gram.nrows(), self.xty.ncols())
            )));
        }
        if theta == 0.0 {
            return Ok(self.unpenalized.clone());
        }
        penalized_solve(self.gram.clone(), &self.xty, priors, theta)
    }
}

fn ridge_normal_solve(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    prior: &DMatrix<f64>,
    theta: f64,
) -> Result<DMatrix<f64>> {
    penalized_solve(x.tr_mul(x), &x.tr_mul(y), prior, theta)
}

fn penalized_solve(
    mut gram: DMatrix<f64>,
    xty: &DMatrix<f64>,
    prior: &DMatrix<f64>,
    theta: f64,
) -> Result<DMatrix<f64>> {
    for j in 0..gram.nrows() {
        gram[(j, j)] += theta;
    }
    let rhs = xty + prior * theta;
    let solved = match Cholesky::new(gram.clone()) {
        Some(chol) => chol.solve(&rhs),
        None => {
            let (inv, _) = pseudo_inverse(&gram)?;
            inv * rhs
        }
    };
    if solved.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("ridge solve produced non-finite weights".into()));
    }
    Ok(solved)
}

/// Best single coefficient along a fixed direction:
/// `argmin_s ‖y − X(qs)‖² = (Xq)ᵀy / ‖Xq‖²`.
pub fn fit_shared_scalar(x: &DesignMatrix, y: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
    check_response(x, y)?;
    if q.len() != x.m() {
        return Err(Error::DimensionMismatch(format!(
            "direction has length {}, design has {} columns",
            q.len(),
            x.m()
        )));
    }
    let z = x.as_matrix() * q;
    let zz = z.norm_squared();
    if zz <= f64::MIN_POSITIVE {
        return Err(Error::DegenerateDirection);
    }
    Ok(z.dot(y) / zz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;
    use nalgebra::dvector;

    fn design(rows: &[&[f64]]) -> DesignMatrix {
        DesignMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn ols_single_column() {
        let x = design(&[&[1.0], &[2.0]]);
        let w = solve_ols(&x, &dvector![1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn ols_identity_returns_response() {
        let x = DesignMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let y = dvector![0.5, -2.0, 7.25];
        let w = solve_ols(&x, &y).unwrap();
        assert_abs_diff_eq!(w, y, epsilon = 1e-14);
    }

    #[test]
    fn ols_rank_deficient_is_minimum_norm() {
        let x = design(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let (w, rank) = solve_ols_with_rank(&x, &dvector![2.0, 2.0]).unwrap();
        assert_eq!(rank, 1);
        assert_abs_diff_eq!(w, dvector![1.0, 1.0], epsilon = 1e-12);
    }

    #[test]
    fn ols_wide_design() {
        // More predictors than rows: many exact fits, the shortest is Xᵀ(XXᵀ)⁻¹y.
        let x = design(&[&[1.0, 0.0, 1.0]]);
        let w = solve_ols(&x, &dvector![2.0]).unwrap();
        assert_abs_diff_eq!(w, dvector![1.0, 0.0, 1.0], epsilon = 1e-12);
    }

    #[test]
    fn ridge_fit_and_prior_agree() {
        let x = design(&[&[1.0], &[2.0]]);
        let y = dvector![1.0, 2.0];
        let prior = dvector![1.0];
        let p = RidgeProblem { design: &x, response: &y, prior: &prior, theta: 5.0 };
        let w = solve_ridge_with_prior(&p).unwrap();
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn ridge_huge_penalty_pins_prior() {
        let x = design(&[&[1.0], &[2.0]]);
        let y = dvector![1.0, 2.0];
        let prior = dvector![0.0];
        let p = RidgeProblem { design: &x, response: &y, prior: &prior, theta: 1e12 };
        assert!(solve_ridge_with_prior(&p).unwrap().norm() <= 1e-5);
    }

    #[test]
    fn ridge_rejects_negative_and_nan_penalty() {
        let x = design(&[&[1.0], &[2.0]]);
        let y = dvector![1.0, 2.0];
        let prior = dvector![0.0];
        for theta in [-1.0, f64::NAN] {
            let p = RidgeProblem { design: &x, response: &y, prior: &prior, theta };
            assert!(solve_ridge_with_prior(&p).is_err());
        }
    }

    #[test]
    fn non_finite_inputs_rejected() {
        assert!(matches!(
            DesignMatrix::new(dmatrix![1.0, f64::INFINITY]),
            Err(Error::NonFinite(_))
        ));
        let x = design(&[&[1.0], &[2.0]]);
        assert!(matches!(solve_ols(&x, &dvector![1.0, f64::NAN]), Err(Error::NonFinite(_))));
        assert!(matches!(
            solve_ols(&x, &dvector![1.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn shared_scalar_examples() {
        let x = DesignMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let y = dvector![2.0, 2.0];
        let q = dvector![1.0, 1.0];
        assert_abs_diff_eq!(fit_shared_scalar(&x, &y, &q).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fit_shared_scalar(&x, &y, &(-&q)).unwrap(), -2.0, epsilon = 1e-15);

        let x = design(&[&[1.0, -1.0, 0.0], &[0.0, 1.0, 1.0], &[1.0, 1.0, 1.0]]);
        let q = dvector![1.0, -1.0, 1.0];
        let y = x.as_matrix() * &q;
        assert_abs_diff_eq!(fit_shared_scalar(&x, &y, &q).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn shared_scalar_degenerate_direction() {
        let x = design(&[&[1.0, 1.0], &[2.0, 2.0]]);
        let err = fit_shared_scalar(&x, &dvector![1.0, 1.0], &dvector![1.0, -1.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateDirection));
    }

    #[test]
    fn batch_matches_single_solves() {
        let x = design(&[&[1.0, 0.5], &[0.0, 1.0], &[2.0, -1.0], &[1.0, 1.0]]);
        let ys = dmatrix![1.0, 0.0; 2.0, 1.0; -1.0, 3.0; 0.5, 0.5];
        let priors = dmatrix![0.1, -1.0; 0.2, 2.0];
        for theta in [0.0, 0.3, 40.0] {
            let batch = solve_ridge_batch(&x, &ys, &priors, theta).unwrap();
            for c in 0..2 {
                let y = ys.column(c).into_owned();
                let prior = priors.column(c).into_owned();
                let p = RidgeProblem { design: &x, response: &y, prior: &prior, theta };
                let single = solve_ridge_with_prior(&p).unwrap();
                assert_abs_diff_eq!(batch.column(c).into_owned(), single, epsilon = 1e-12);
            }
            let reused = RidgeBatch::new(&x, &ys).unwrap().solve(&priors, theta).unwrap();
            assert_eq!(reused, batch);
        }
        assert!(RidgeBatch::new(&x, &ys).unwrap().solve(&dmatrix![1.0], 1.0).is_err());
    }
}
