//! Planted-model datasets for testing the sweep end to end.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::data::{median_split, pairwise_encode, DatasetKind, MedianRule, TernaryDataset};
use crate::error::{Error, Result};
use crate::linear::DesignMatrix;

/// Items with standard-normal cues `z` and criterion `z·w + noise`.
///
/// With `cue_correlation = ρ > 0` the cues share a factor `f`:
/// `z_j = sign(w_j) √ρ f + √(1−ρ) e_j`, so every cue leans the way its weight points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedModel {
    pub weights: Vec<f64>,
    pub noise_sd: f64,
    pub n_items: usize,
    #[serde(default)]
    pub cue_correlation: f64,
}

impl PlantedModel {
    fn check(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("planted weights must be non-empty and finite"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid("noise sd must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.cue_correlation) {
            return Err(Error::invalid("cue correlation must be in [0, 1)"));
        }
        if self.n_items < 2 {
            return Err(Error::invalid("need at least two items"));
        }
        Ok(())
    }

    /// Raw item cues (`n_items × m`) and their noisy criterion.
    pub fn sample_items<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(DMatrix<f64>, Vec<f64>)> {
        self.check()?;
        let m = self.weights.len();
        let (a, b) = (self.cue_correlation.sqrt(), (1.0 - self.cue_correlation).sqrt());
        let mut z: DMatrix<f64> = DMatrix::from_fn(self.n_items, m, |_, _| StandardNormal.sample(rng));
        for i in 0..self.n_items {
            let f: f64 = StandardNormal.sample(rng);
            for (j, w) in self.weights.iter().enumerate() {
                let lean = if *w < 0.0 { -a } else { a };
                z[(i, j)] = lean * f + b * z[(i, j)];
            }
        }
        let w = DVector::from_column_slice(&self.weights);
        let signal: DVector<f64> = &z * w;
        let criterion = signal
            .iter()
            .map(|s| {
                let e: f64 = StandardNormal.sample(rng);
                s + self.noise_sd * e
            })
            .collect();
        Ok((z, criterion))
    }

    pub fn cue_names(&self) -> Vec<String> {
        (0..self.weights.len()).map(|j| format!("cue{}", j + 1)).collect()
    }
}

/// Binary median split of sampled items, then all distinct-criterion pairs.
pub fn planted_paired_dataset<R: Rng + ?Sized>(model: &PlantedModel, rng: &mut R) -> Result<TernaryDataset> {
    let (z, criterion) = model.sample_items(rng)?;
    let split = median_split(&z, MedianRule::Binary)?;
    pairwise_encode(&split.values, &criterion, model.cue_names(), rng)
}

/// Ternary median split of sampled items with label `sign(z·w + noise)`.
pub fn planted_classification_dataset<R: Rng + ?Sized>(model: &PlantedModel, rng: &mut R) -> Result<TernaryDataset> {
    let (z, criterion) = model.sample_items(rng)?;
    let split = median_split(&z, MedianRule::Ternary)?;
    let y = DVector::from_iterator(criterion.len(), criterion.iter().map(|&c| if c > 0.0 { 1.0 } else { -1.0 }));
    TernaryDataset::new(
        DesignMatrix::new(split.values)?,
        y,
        model.cue_names(),
        DatasetKind::Classification,
    )
}
