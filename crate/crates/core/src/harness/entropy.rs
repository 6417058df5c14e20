use crate::error::{Error, Result};

/// Normalized Shannon entropy of a weight vector.
///
/// `w̃_j = |w_j| / ‖w‖₁ · φ^{r_j}`, renormalized to sum to one, then
/// `H̃ = −Σ w̃_j log₂ w̃_j / log₂ m` with `0 log 0 = 0`. The result lies in
/// `[0, 1]`: 1 for uniform predictive force, 0 when one weight carries it all.
/// A single weight is trivially uniform and scores 1.
pub fn normalized_entropy(w: &[f64], ranks: &[usize], phi: f64) -> Result<f64> {
    let m = w.len();
    if m == 0 || ranks.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{m} weights and {} ranks",
            ranks.len()
        )));
    }
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::invalid(format!("phi must be positive, got {phi}")));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("weights"));
    }
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    if l1 == 0.0 {
        return Err(Error::UndefinedEntropy);
    }
    if m == 1 {
        return Ok(1.0);
    }
    let scaled: Vec<f64> = w
        .iter()
        .zip(ranks)
        .map(|(v, &r)| v.abs() / l1 * phi.powi(r as i32))
        .collect();
    let total: f64 = scaled.iter().sum();
    let h: f64 = scaled
        .iter()
        .map(|&s| s / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    Ok((h / (m as f64).log2()).clamp(0.0, 1.0))
}
