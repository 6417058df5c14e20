//! Canonical double-gamma haemodynamic response.

use std::sync::OnceLock;

use statrs::function::gamma::{gamma_lr, ln_gamma};

pub const PEAK_SHAPE: f64 = 6.0;
pub const UNDERSHOOT_SHAPE: f64 = 16.0;
pub const UNDERSHOOT_RATIO: f64 = 1.0 / 6.0;

fn gamma_pdf(shape: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    ((shape - 1.0) * t.ln() - t - ln_gamma(shape)).exp()
}

fn unnormalized(t: f64) -> f64 {
    gamma_pdf(PEAK_SHAPE, t) - UNDERSHOOT_RATIO * gamma_pdf(UNDERSHOOT_SHAPE, t)
}

/// Maximum of the unscaled kernel, located by golden-section search around
/// the peak-gamma mode.
fn peak_value() -> f64 {
    static PEAK: OnceLock<f64> = OnceLock::new();
    *PEAK.get_or_init(|| {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (3.0, 7.0);
        while b - a > 1e-12 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if unnormalized(c) > unnormalized(d) {
                b = d;
            } else {
                a = c;
            }
        }
        unnormalized(0.5 * (a + b))
    })
}

/// Double-gamma HRF at `t` seconds (zero for `t ≤ 0`), peak-normalized to 1.
pub fn double_gamma_hrf(t: f64) -> f64 {
    unnormalized(t) / peak_value()
}

/// `∫₀ᵗ h(τ) dτ` for the peak-normalized HRF.
pub fn hrf_integral(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (gamma_lr(PEAK_SHAPE, t) - UNDERSHOOT_RATIO * gamma_lr(UNDERSHOOT_SHAPE, t)) / peak_value()
}

/// Response at `t` to a unit boxcar starting at `onset` and lasting `duration`:
/// the exact convolution of the boxcar with the HRF.
pub fn boxcar_response(t: f64, onset: f64, duration: f64) -> f64 {
    hrf_integral(t - onset) - hrf_integral(t - onset - duration)
}
