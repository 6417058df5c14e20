//! LSA, LSS and LSS-prior trial estimates.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};
use crate::linear::{
    pseudo_inverse, solve_ols, solve_ols_with_rank, solve_ridge_batch, solve_ridge_with_prior, DesignMatrix,
    RidgeProblem,
};

/// One GLM with a regressor per trial.
pub fn estimate_lsa(x: &DesignMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    solve_ols(x, y)
}

/// One two-column GLM per trial: the trial's regressor and the sum of all
/// the others. Returns the trial coefficients and the trials whose
/// two-column design was rank deficient.
pub fn estimate_lss(x: &DesignMatrix, y: &DVector<f64>) -> Result<(DVector<f64>, Vec<usize>)> {
    let l = x.m();
    if l < 2 {
        return Err(Error::invalid("LSS needs at least two trials"));
    }
    let total: DVector<f64> = x.as_matrix().column_sum();
    let mut w = DVector::zeros(l);
    let mut flagged = Vec::new();
    for k in 0..l {
        let target = x.as_matrix().column(k).into_owned();
        let others = &total - &target;
        let z = DesignMatrix::new(DMatrix::from_columns(&[target, others]))?;
        let (beta, rank) = solve_ols_with_rank(&z, y)?;
        if rank < 2 {
            flagged.push(k);
        }
        w[k] = beta[0];
    }
    Ok((w, flagged))
}

/// Ridge from the LSA design toward the LSS estimate.
pub fn estimate_lss_prior(x: &DesignMatrix, y: &DVector<f64>, w_lss: &DVector<f64>, theta: f64) -> Result<DVector<f64>> {
    solve_ridge_with_prior(&RidgeProblem {
        design: x,
        response: y,
        prior: w_lss,
        theta,
    })
}

/// LSA for every column of `y` (`n × voxels`), giving `ℓ × voxels`.
pub fn lsa_batch(x: &DesignMatrix, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if y.nrows() != x.n() {
        return Err(Error::DimensionMismatch("series length differs from design".into()));
    }
    let (pinv, _) = pseudo_inverse(x.as_matrix())?;
    Ok(pinv * y)
}

/// LSS for every column of `y`, from the Gram matrix of the LSA design.
/// The second value counts rank-deficient trial designs.
pub fn lss_batch(x: &DesignMatrix, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, usize)> {
    let l = x.m();
    if l < 2 {
        return Err(Error::invalid("LSS needs at least two trials"));
    }
    if y.nrows() != x.n() {
        return Err(Error::DimensionMismatch("series length differs from design".into()));
    }
    let g = x.as_matrix().tr_mul(x.as_matrix());
    let p = x.as_matrix().tr_mul(y);
    let row_sums: Vec<f64> = (0..l).map(|k| g.row(k).sum()).collect();
    let grand: f64 = row_sums.iter().sum();
    let q = p.row_sum();
    let mut out = DMatrix::zeros(l, y.ncols());
    let mut flagged = 0;
    for k in 0..l {
        let a = g[(k, k)];
        let b = row_sums[k] - a;
        let c = grand - 2.0 * row_sums[k] + a;
        let zz = Matrix2::new(a, b, b, c);
        let det = a * c - b * b;
        let first_row = if det > 1e-10 * (a * c).max(f64::MIN_POSITIVE) {
            [c / det, -b / det]
        } else {
            flagged += 1;
            let (inv, _) = pseudo_inverse(&DMatrix::from_iterator(2, 2, zz.iter().copied()))?;
            [inv[(0, 0)], inv[(0, 1)]]
        };
        for v in 0..y.ncols() {
            let pk = p[(k, v)];
            out[(k, v)] = first_row[0] * pk + first_row[1] * (q[v] - pk);
        }
    }
    Ok((out, flagged))
}

/// LSS-prior estimates for every column of `y` at one penalty.
pub fn lss_prior_batch(x: &DesignMatrix, y: &DMatrix<f64>, w_lss: &DMatrix<f64>, theta: f64) -> Result<DMatrix<f64>> {
    solve_ridge_batch(x, y, w_lss, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fmri::config::SimConfig;
    use crate::fmri::design::{build_design_lsa, EventSchedule};
    use nalgebra::dmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn design(isi: f64, reps: usize, seed: u64) -> DesignMatrix {
        let cfg = SimConfig { isi, reps_per_stim: reps, ..SimConfig::default() };
        build_design_lsa(&cfg, &EventSchedule::random(&cfg, &mut ChaCha8Rng::seed_from_u64(seed))).unwrap()
    }

    fn noise(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn two_trials_lss_equals_lsa() {
        let x = design(2.0, 1, 1);
        assert_eq!(x.m(), 2);
        let y = noise(x.n(), 1, 2).column(0).into_owned();
        let lsa = estimate_lsa(&x, &y).unwrap();
        let (lss, flagged) = estimate_lss(&x, &y).unwrap();
        assert!(flagged.is_empty());
        assert!((lsa - lss).amax() < 1e-10);
    }

    #[test]
    fn orthogonal_regressors_make_lss_equal_lsa() {
        let x = DesignMatrix::new(dmatrix![
            1.0, 0.0, 0.0;
            0.0, 1.0, 0.0;
            0.0, 0.0, 1.0;
            0.0, 0.0, 0.0
        ])
        .unwrap();
        let y = DVector::from_vec(vec![1.5, -2.0, 0.25, 9.0]);
        let lsa = estimate_lsa(&x, &y).unwrap();
        let (lss, _) = estimate_lss(&x, &y).unwrap();
        assert!((&lsa - &lss).amax() < 1e-8);
        assert!((lsa - x.as_matrix().transpose() * &y).amax() < 1e-12);
    }

    #[test]
    fn batches_match_single_voxel_estimates() {
        let x = design(2.0, 10, 3);
        let y = noise(x.n(), 6, 4);
        let lsa = lsa_batch(&x, &y).unwrap();
        let (lss, flagged) = lss_batch(&x, &y).unwrap();
        assert_eq!(flagged, 0);
        for v in 0..6 {
            let col = y.column(v).into_owned();
            assert!((lsa.column(v) - estimate_lsa(&x, &col).unwrap()).amax() < 1e-9);
            let (single, _) = estimate_lss(&x, &col).unwrap();
            assert!((lss.column(v) - &single).amax() < 1e-8);
            let prior = lss_prior_batch(&x, &y, &lss, 3.0).unwrap();
            let one = estimate_lss_prior(&x, &col, &single, 3.0).unwrap();
            assert!((prior.column(v) - one).amax() < 1e-8);
        }
    }

    #[test]
    fn lss_prior_endpoints() {
        let x = design(2.0, 10, 5);
        let y = noise(x.n(), 4, 6) * 50.0;
        let lsa = lsa_batch(&x, &y).unwrap();
        let (lss, _) = lss_batch(&x, &y).unwrap();
        assert_eq!(lss_prior_batch(&x, &y, &lss, 0.0).unwrap(), lsa);
        let far = lss_prior_batch(&x, &y, &lss, 1e10).unwrap();
        assert!((far - &lss).amax() < 1e-4);
    }

    #[test]
    fn lss_is_less_variable_on_collinear_designs() {
        let x = design(2.0, 20, 7);
        let y = noise(x.n(), 400, 8) * 10.0;
        let lsa = lsa_batch(&x, &y).unwrap();
        let (lss, _) = lss_batch(&x, &y).unwrap();
        let var = |m: &DMatrix<f64>| m.iter().map(|v| v * v).sum::<f64>() / m.len() as f64;
        assert!(var(&lss) < var(&lsa));
    }

    #[test]
    fn collinear_pair_is_flagged() {
        let x = DesignMatrix::new(dmatrix![1.0, 1.0; 2.0, 2.0; 0.0, 0.0]).unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0, 0.0]);
        let (_, flagged) = estimate_lss(&x, &y).unwrap();
        assert_eq!(flagged, vec![0, 1]);
        let (_, count) = lss_batch(&x, &DMatrix::from_column_slice(3, 1, y.as_slice())).unwrap();
        assert_eq!(count, 2);
    }
}
