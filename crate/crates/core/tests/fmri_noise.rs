//! Noise-only error of the LSA and LSS trial estimates, simulated and
//! predicted from the smoothed-noise covariance.

use nalgebra::{DMatrix, DVector, Matrix2};

use robust_priors::fmri::config::SimConfig;
use robust_priors::fmri::design::{build_design_lsa, EventSchedule};
use robust_priors::fmri::estimate::lss_batch;
use robust_priors::fmri::simulate::simulate_signal;
use robust_priors::harness::sweep::iteration_rng;
use robust_priors::linear::pseudo_inverse;
use robust_priors::DesignMatrix;

fn kernel(fwhm_samples: f64) -> Vec<f64> {
    let sigma = fwhm_samples / (8.0 * 2f64.ln()).sqrt();
    let r = (4.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-r..=r).map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Covariance over time of one voxel's smoothed noise away from any edge.
fn noise_covariance(cfg: &SimConfig, n: usize) -> DMatrix<f64> {
    let spatial: f64 = cfg
        .voxel_mm
        .iter()
        .map(|mm| kernel(cfg.fwhm_mm / mm).iter().map(|v| v * v).sum::<f64>())
        .product();
    let kt = kernel(cfg.fwhm_s / cfg.tr);
    let lag = |h: usize| -> f64 { kt.iter().zip(kt.iter().skip(h)).map(|(a, b)| a * b).sum() };
    DMatrix::from_fn(n, n, |i, j| cfg.sigma2_scanner * spatial * lag(i.abs_diff(j)))
}

/// Rows map `y` to trial estimates: LSA and per-trial two-column LSS.
fn estimator_rows(x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (lsa, _) = pseudo_inverse(x).unwrap();
    let total: DVector<f64> = x.column_sum();
    let mut lss = DMatrix::zeros(x.ncols(), x.nrows());
    for i in 0..x.ncols() {
        let a = x.column(i).into_owned();
        let b = &total - &a;
        let g = Matrix2::new(a.dot(&a), a.dot(&b), a.dot(&b), b.dot(&b));
        let inv = g.try_inverse().unwrap();
        let row = (&a * inv[(0, 0)] + &b * inv[(0, 1)]).transpose();
        lss.set_row(i, &row);
    }
    (lsa, lss)
}

fn predicted_mse(rows: &DMatrix<f64>, cov: &DMatrix<f64>) -> f64 {
    (rows * cov * rows.transpose()).diagonal().mean()
}

struct Comparison {
    simulated: [f64; 2],
    predicted: [f64; 2],
}

fn compare(cfg: &SimConfig, iterations: usize) -> Comparison {
    let mut simulated = [0.0; 2];
    let mut predicted = [0.0; 2];
    let mut count = 0.0;
    for it in 0..iterations {
        for run in simulate_signal(cfg, &mut iteration_rng(cfg.seed, it)).unwrap() {
            let x = run.x_lsa.as_matrix();
            let noise = &run.y - x * &run.psi;
            let (lsa_rows, lss_rows) = estimator_rows(x);
            let (lss, _) = lss_batch(&DesignMatrix::new(x.clone()).unwrap(), &noise).unwrap();
            simulated[0] += (&lsa_rows * &noise).map(|v| v * v).mean();
            simulated[1] += lss.map(|v| v * v).mean();
            let cov = noise_covariance(cfg, x.nrows());
            predicted[0] += predicted_mse(&lsa_rows, &cov);
            predicted[1] += predicted_mse(&lss_rows, &cov);
            count += 1.0;
        }
    }
    Comparison {
        simulated: simulated.map(|v| v / count),
        predicted: predicted.map(|v| v / count),
    }
}

#[test]
fn smoothed_noise_error_matches_prediction_and_favors_lsa() {
    let cfg = SimConfig { isi: 2.0, sigma2_psi: 10.0, ..SimConfig::default() };
    let c = compare(&cfg, 4);
    for k in 0..2 {
        let rel = (c.simulated[k] / c.predicted[k] - 1.0).abs();
        assert!(rel < 0.05, "estimator {k}: simulated {} predicted {}", c.simulated[k], c.predicted[k]);
    }
    assert!(c.predicted[1] > c.predicted[0], "{:?}", c.predicted);
}

#[test]
fn white_temporal_noise_favors_lss() {
    let cfg = SimConfig { isi: 2.0, sigma2_psi: 10.0, fwhm_s: 1e-6, ..SimConfig::default() };
    let c = compare(&cfg, 2);
    for k in 0..2 {
        let rel = (c.simulated[k] / c.predicted[k] - 1.0).abs();
        assert!(rel < 0.05, "estimator {k}: simulated {} predicted {}", c.simulated[k], c.predicted[k]);
    }
    assert!(c.predicted[1] < 0.8 * c.predicted[0], "{:?}", c.predicted);
}

/// Mean predicted LSA noise error over random designs at one ISI.
fn lsa_error_at(isi: f64, fwhm_s: f64) -> f64 {
    let cfg = SimConfig { isi, fwhm_s, ..SimConfig::default() };
    let mut rng = iteration_rng(1, 0);
    let designs = 20;
    (0..designs)
        .map(|_| {
            let x = build_design_lsa(&cfg, &EventSchedule::random(&cfg, &mut rng)).unwrap();
            let (lsa_rows, _) = estimator_rows(x.as_matrix());
            predicted_mse(&lsa_rows, &noise_covariance(&cfg, x.n()))
        })
        .sum::<f64>()
        / designs as f64
}

#[test]
fn lsa_error_falls_with_isi_under_white_temporal_noise() {
    let white: Vec<f64> = [2.0, 3.0, 4.0].iter().map(|&isi| lsa_error_at(isi, 1e-6)).collect();
    assert!(white[0] > white[1] && white[1] > white[2], "{white:?}");
    // With the 4.5 s temporal kernel the ordering no longer holds.
    let smoothed: Vec<f64> = [2.0, 4.0].iter().map(|&isi| lsa_error_at(isi, 4.5)).collect();
    assert!(smoothed[0] < smoothed[1], "{smoothed:?}");
}
