//! Separable Gaussian smoothing of 4-D noise.

use nalgebra::DMatrix;

use super::config::SimConfig;
use crate::error::{Error, Result};

/// `σ = FWHM / (2 √(2 ln 2))`.
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
}

/// Sampled Gaussian with radius `⌈4σ⌉`, normalized to sum to one.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (4.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Convolves every line of `data` along `axis` with `kernel`, clamping at the edges.
///
/// `dims` and `strides` describe the layout of `data` in elements.
pub fn smooth_axis(data: &mut [f64], dims: &[usize], strides: &[usize], axis: usize, kernel: &[f64]) {
    if kernel.len() <= 1 {
        return;
    }
    let len = dims[axis];
    let stride = strides[axis];
    let radius = (kernel.len() / 2) as i64;
    let mut line = vec![0.0; len];
    let mut out = vec![0.0; len];
    for start in 0..data.len() {
        if (start / stride) % len != 0 {
            continue;
        }
        for (i, v) in line.iter_mut().enumerate() {
            *v = data[start + i * stride];
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let j = (i as i64 + k as i64 - radius).clamp(0, len as i64 - 1) as usize;
                    w * line[j]
                })
                .sum();
        }
        for (i, v) in out.iter().enumerate() {
            data[start + i * stride] = *v;
        }
    }
}

/// Per-axis smoothing widths in samples: `[time, x, y, z]`.
pub fn axis_sigmas(cfg: &SimConfig) -> [f64; 4] {
    [
        fwhm_to_sigma(cfg.fwhm_s / cfg.tr),
        fwhm_to_sigma(cfg.fwhm_mm / cfg.voxel_mm[0]),
        fwhm_to_sigma(cfg.fwhm_mm / cfg.voxel_mm[1]),
        fwhm_to_sigma(cfg.fwhm_mm / cfg.voxel_mm[2]),
    ]
}

/// Smooths an `n × (3d)³` noise matrix (voxels row-major in the columns)
/// along time and the three spatial axes.
pub fn smooth_noise(noise: &mut DMatrix<f64>, cfg: &SimConfig) -> Result<()> {
    let side = cfg.volume_side();
    let n = noise.nrows();
    if noise.ncols() != side.pow(3) {
        return Err(Error::DimensionMismatch(format!(
            "noise has {} voxels, volume has {}",
            noise.ncols(),
            side.pow(3)
        )));
    }
    if noise.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("noise"));
    }
    smooth_volume(noise.as_mut_slice(), [n, side, side, side], &axis_kernels(cfg));
    Ok(())
}

pub fn axis_kernels(cfg: &SimConfig) -> [Vec<f64>; 4] {
    axis_sigmas(cfg).map(gaussian_kernel)
}

/// Smooths a `[time, x, y, z]` array stored time-fastest, then z, y, x.
pub fn smooth_volume(data: &mut [f64], dims: [usize; 4], kernels: &[Vec<f64>; 4]) {
    let [n, _, sy, sz] = dims;
    let strides = [1, n * sy * sz, n * sz, n];
    for (axis, kernel) in kernels.iter().enumerate() {
        smooth_axis(data, &dims, &strides, axis, kernel);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn tiny() -> SimConfig {
        SimConfig {
            d: 3,
            reps_per_stim: 2,
            ..SimConfig::default()
        }
    }

    /// Width at half maximum of a symmetric peak, by linear interpolation.
    fn measured_fwhm(profile: &[f64], peak: usize) -> f64 {
        let half = profile[peak] / 2.0;
        let mut i = peak;
        while profile[i + 1] > half {
            i += 1;
        }
        let frac = (profile[i] - half) / (profile[i] - profile[i + 1]);
        2.0 * ((i - peak) as f64 + frac)
    }

    #[test]
    fn impulse_width_matches_target_per_axis() {
        let cfg = tiny();
        let side = cfg.volume_side();
        let n = 41;
        let mut e = DMatrix::zeros(n, side.pow(3));
        let c = side / 2;
        let center = (c * side + c) * side + c;
        e[(20, center)] = 1.0;
        smooth_noise(&mut e, &cfg).unwrap();
        let time: Vec<f64> = (0..n).map(|t| e[(t, center)]).collect();
        let xs: Vec<f64> = (0..side).map(|x| e[(20, (x * side + c) * side + c)]).collect();
        let ys: Vec<f64> = (0..side).map(|y| e[(20, (c * side + y) * side + c)]).collect();
        let zs: Vec<f64> = (0..side).map(|z| e[(20, (c * side + c) * side + z)]).collect();
        let targets = [
            cfg.fwhm_s / cfg.tr,
            cfg.fwhm_mm / cfg.voxel_mm[0],
            cfg.fwhm_mm / cfg.voxel_mm[1],
            cfg.fwhm_mm / cfg.voxel_mm[2],
        ];
        for ((profile, peak), target) in [(time, 20), (xs, c), (ys, c), (zs, c)].iter().zip(targets) {
            let w = measured_fwhm(profile, *peak);
            assert!((w - target).abs() / target < 0.1, "measured {w}, target {target}");
        }
    }

    #[test]
    fn constant_input_is_preserved() {
        let cfg = tiny();
        let mut e = DMatrix::from_element(15, cfg.volume_side().pow(3), 3.25);
        smooth_noise(&mut e, &cfg).unwrap();
        assert!(e.iter().all(|v| (v - 3.25).abs() < 1e-12));
    }

    #[test]
    fn smoothing_raises_lag_one_autocorrelation() {
        let cfg = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200;
        let mut e = DMatrix::from_fn(n, cfg.volume_side().pow(3), |_, _| StandardNormal.sample(&mut rng));
        let lag1 = |m: &DMatrix<f64>| {
            let mut num = 0.0;
            let mut den = 0.0;
            for col in m.column_iter() {
                for t in 0..n - 1 {
                    num += col[t] * col[t + 1];
                }
                den += col.norm_squared();
            }
            num / den
        };
        let before = lag1(&e);
        smooth_noise(&mut e, &cfg).unwrap();
        let after = lag1(&e);
        assert!(before.abs() < 0.05);
        assert!(after > 0.5, "{after}");
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(1.7);
        assert_eq!(k.len(), 2 * 7 + 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(k.iter().zip(k.iter().rev()).all(|(a, b)| a == b));
        assert_eq!(gaussian_kernel(0.0), vec![1.0]);
    }
}
