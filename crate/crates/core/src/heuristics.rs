//! Cue validities and the tallying (TAL) and take-the-best (TTB) rules.
//!
//! Rows are paired comparisons coded in `{-1, 0, +1}`: `-1` favours the left
//! option, `+1` the right one and `0` means the cue does not discriminate.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::DesignMatrix;

/// A forced-choice decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Left,
    Right,
    Tie,
}

impl Choice {
    pub fn from_sign(v: f64) -> Self {
        if v > 0.0 {
            Choice::Right
        } else if v < 0.0 {
            Choice::Left
        } else {
            Choice::Tie
        }
    }

    /// `-1`, `+1` or `0`.
    pub fn value(self) -> f64 {
        match self {
            Choice::Left => -1.0,
            Choice::Right => 1.0,
            Choice::Tie => 0.0,
        }
    }

    /// Expected accuracy against the true outcome `y ∈ {-1, +1}`: a tie is a
    /// fair coin flip and earns half a point.
    pub fn credit(self, y: f64) -> f64 {
        match self {
            Choice::Tie => 0.5,
            c if c.value() == y => 1.0,
            _ => 0.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Choice::Left => Choice::Right,
            Choice::Right => Choice::Left,
            Choice::Tie => Choice::Tie,
        }
    }
}

/// Which heuristic decision rule to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    Tal,
    Ttb,
}

/// Validities, directions and ascending |validity| ranks of every cue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueStats {
    validities: Vec<f64>,
    directions: Vec<f64>,
    ranks: Vec<usize>,
}

impl CueStats {
    /// Builds the stats from already computed validities.
    ///
    /// Equal `|v̂|` are ranked by column index, the lower index getting the
    /// lower rank, so the ranks always form a permutation of `0..m`.
    pub fn from_validities(validities: Vec<f64>) -> Result<Self> {
        if validities.is_empty() {
            return Err(Error::invalid("at least one cue is required"));
        }
        if validities.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::invalid("validities must lie in [-1, 1]"));
        }
        let directions = validities.iter().map(|&v| sign(v)).collect();
        let ranks = validities
            .iter()
            .enumerate()
            .map(|(j, vj)| {
                validities
                    .iter()
                    .enumerate()
                    .filter(|&(k, vk)| (vk.abs(), k) < (vj.abs(), j))
                    .count()
            })
            .collect();
        Ok(Self {
            validities,
            directions,
            ranks,
        })
    }

    pub fn validities(&self) -> &[f64] {
        &self.validities
    }

    pub fn directions(&self) -> &[f64] {
        &self.directions
    }

    pub fn direction_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.directions)
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn m(&self) -> usize {
        self.validities.len()
    }

    /// True when no cue has a usable direction.
    pub fn is_degenerate(&self) -> bool {
        self.directions.iter().all(|&d| d == 0.0)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_ternary(values: impl IntoIterator<Item = f64>, what: &str) -> Result<()> {
    for v in values {
        if v != -1.0 && v != 0.0 && v != 1.0 {
            return Err(Error::invalid(format!("{what} must be in {{-1, 0, 1}}, found {v}")));
        }
    }
    Ok(())
}

fn check_outcomes(y: &DVector<f64>, n: usize) -> Result<()> {
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} outcomes for {n} rows",
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|&&v| v != -1.0 && v != 1.0) {
        return Err(Error::invalid(format!("outcomes must be -1 or +1, found {bad}")));
    }
    Ok(())
}

/// `(R − W) / (R + W)` per cue over the rows where the cue discriminates.
///
/// A cue that never discriminates gets validity 0.
pub fn cue_validities(x: &DesignMatrix, y: &DVector<f64>) -> Result<Vec<f64>> {
    check_outcomes(y, x.n())?;
    check_ternary(x.iter().copied(), "cue values")?;
    Ok(x
        .column_iter()
        .map(|col| {
            let (mut right, mut wrong) = (0u64, 0u64);
            for (&c, &yi) in col.iter().zip(y.iter()) {
                if c == 0.0 {
                    continue;
                }
                if c == yi {
                    right += 1;
                } else {
                    wrong += 1;
                }
            }
            if right + wrong == 0 {
                0.0
            } else {
                (right as f64 - wrong as f64) / (right + wrong) as f64
            }
        })
        .collect())
}

pub fn cue_stats(x: &DesignMatrix, y: &DVector<f64>) -> Result<CueStats> {
    CueStats::from_validities(cue_validities(x, y)?)
}

fn check_row(x: &[f64], stats: &CueStats) -> Result<()> {
    if x.len() != stats.m() {
        return Err(Error::DimensionMismatch(format!(
            "row has {} cues, stats describe {}",
            x.len(),
            stats.m()
        )));
    }
    check_ternary(x.iter().copied(), "cue values")
}

/// `sign(Σ_j sign(v̂_j x_j))`.
pub fn tal_predict(x: &[f64], stats: &CueStats) -> Result<Choice> {
    check_row(x, stats)?;
    let votes: f64 = x
        .iter()
        .zip(&stats.directions)
        .map(|(&xj, &dj)| xj * dj)
        .sum();
    Ok(Choice::from_sign(votes))
}

/// Decides on the highest-ranked cue that discriminates, read in that cue's
/// direction. A tie when no cue discriminates or the deciding cue has no
/// direction.
pub fn ttb_predict(x: &[f64], stats: &CueStats) -> Result<Choice> {
    check_row(x, stats)?;
    let best = x
        .iter()
        .enumerate()
        .filter(|(_, &xj)| xj != 0.0)
        .max_by_key(|&(j, _)| stats.ranks[j]);
    Ok(match best {
        Some((j, &xj)) => Choice::from_sign(stats.directions[j] * xj),
        None => Choice::Tie,
    })
}

pub fn predict(rule: Heuristic, x: &[f64], stats: &CueStats) -> Result<Choice> {
    match rule {
        Heuristic::Tal => tal_predict(x, stats),
        Heuristic::Ttb => ttb_predict(x, stats),
    }
}

/// Choices of `rule` for every row of `x`.
pub fn predict_rows(rule: Heuristic, x: &DesignMatrix, stats: &CueStats) -> Result<Vec<Choice>> {
    let mut row = vec![0.0; x.m()];
    (0..x.n())
        .map(|i| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = x[(i, j)];
            }
            predict(rule, &row, stats)
        })
        .collect()
}

/// Mean credit of `rule` on held-out rows (ties count one half).
pub fn heuristic_accuracy(
    x_test: &DesignMatrix,
    y_test: &DVector<f64>,
    stats: &CueStats,
    rule: Heuristic,
) -> Result<f64> {
    check_outcomes(y_test, x_test.n())?;
    let choices = predict_rows(rule, x_test, stats)?;
    Ok(mean_credit(&choices, y_test))
}

pub(crate) fn mean_credit(choices: &[Choice], y: &DVector<f64>) -> f64 {
    let total: f64 = choices.iter().zip(y.iter()).map(|(c, &yi)| c.credit(yi)).sum();
    total / choices.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dvector, DMatrix};
    use proptest::prelude::*;

    fn column(values: &[f64]) -> DesignMatrix {
        DesignMatrix::new(DMatrix::from_column_slice(values.len(), 1, values)).unwrap()
    }

    #[test]
    fn validity_counts_right_and_wrong() {
        let x = column(&[1.0, 1.0, -1.0, 0.0]);
        let v = cue_validities(&x, &dvector![1.0, -1.0, -1.0, 1.0]).unwrap();
        assert_eq!(v, vec![1.0 / 3.0]);
    }

    #[test]
    fn validity_perfect_and_silent_cues() {
        let y = dvector![1.0, -1.0, 1.0];
        assert_eq!(cue_validities(&column(&[1.0, -1.0, 1.0]), &y).unwrap(), vec![1.0]);
        assert_eq!(cue_validities(&column(&[0.0, 0.0, 0.0]), &y).unwrap(), vec![0.0]);
    }

    #[test]
    fn validity_rejects_zero_outcome_and_non_ternary_cues() {
        let x = column(&[1.0, 1.0]);
        assert!(cue_validities(&x, &dvector![1.0, 0.0]).is_err());
        assert!(cue_validities(&column(&[0.5, 1.0]), &dvector![1.0, -1.0]).is_err());
    }

    #[test]
    fn ranks_and_directions() {
        let s = CueStats::from_validities(vec![0.2, 0.8, 0.5]).unwrap();
        assert_eq!(s.ranks(), &[0, 2, 1]);
        let s = CueStats::from_validities(vec![-0.6, 0.1]).unwrap();
        assert_eq!(s.directions(), &[-1.0, 1.0]);
        let s = CueStats::from_validities(vec![0.5, 0.5]).unwrap();
        assert_eq!(s.ranks(), &[0, 1]);
        let s = CueStats::from_validities(vec![0.0, -0.3, 0.3]).unwrap();
        assert_eq!(s.directions(), &[0.0, -1.0, 1.0]);
        assert_eq!(s.ranks(), &[0, 1, 2]);
    }

    #[test]
    fn homestead_example() {
        // Cues: low pollution, low price, museums. All valid in the positive
        // direction, museums the most valid.
        let stats = CueStats::from_validities(vec![0.3, 0.5, 0.9]).unwrap();
        let x = [-1.0, -1.0, 1.0];
        assert_eq!(tal_predict(&x, &stats).unwrap(), Choice::Left);
        assert_eq!(ttb_predict(&x, &stats).unwrap(), Choice::Right);
    }

    #[test]
    fn ties_on_silent_rows() {
        let stats = CueStats::from_validities(vec![0.3, 0.5, 0.9]).unwrap();
        assert_eq!(tal_predict(&[0.0; 3], &stats).unwrap(), Choice::Tie);
        assert_eq!(ttb_predict(&[0.0; 3], &stats).unwrap(), Choice::Tie);
    }

    #[test]
    fn tal_reads_negative_validity_cues_backwards() {
        let stats = CueStats::from_validities(vec![0.9, -0.2]).unwrap();
        assert_eq!(tal_predict(&[1.0, -1.0], &stats).unwrap(), Choice::Right);
    }

    #[test]
    fn ttb_uses_best_discriminating_cue() {
        let stats = CueStats::from_validities(vec![0.9, 0.1, 0.4]).unwrap();
        assert_eq!(ttb_predict(&[0.0, 1.0, -1.0], &stats).unwrap(), Choice::Left);
    }

    #[test]
    fn accuracy_scoring() {
        let stats = CueStats::from_validities(vec![0.5]).unwrap();
        // Rows: correct, correct, wrong, tie.
        let x = column(&[1.0, -1.0, 1.0, 0.0]);
        let y = dvector![1.0, -1.0, -1.0, 1.0];
        let acc = heuristic_accuracy(&x, &y, &stats, Heuristic::Tal).unwrap();
        assert_eq!(acc, 0.625);

        let ties = column(&[0.0, 0.0]);
        let acc = heuristic_accuracy(&ties, &dvector![1.0, -1.0], &stats, Heuristic::Ttb).unwrap();
        assert_eq!(acc, 0.5);

        let acc = heuristic_accuracy(&column(&[1.0, -1.0]), &dvector![1.0, -1.0], &stats, Heuristic::Ttb)
            .unwrap();
        assert_eq!(acc, 1.0);
    }

    fn ternary() -> impl Strategy<Value = f64> {
        prop_oneof![Just(-1.0), Just(0.0), Just(1.0)]
    }

    fn validities(m: usize) -> impl Strategy<Value = Vec<f64>> {
        // Multiples of 1/8 so that ties in |v̂| actually occur.
        prop::collection::vec((-8i32..=8).prop_map(|k| f64::from(k) / 8.0), m)
    }

    proptest! {
        #[test]
        fn ranks_form_a_permutation(v in (1usize..8).prop_flat_map(validities)) {
            let stats = CueStats::from_validities(v).unwrap();
            let mut r = stats.ranks().to_vec();
            r.sort_unstable();
            prop_assert_eq!(r, (0..stats.m()).collect::<Vec<_>>());
        }

        #[test]
        fn negating_a_row_flips_the_choice(
            (v, x) in (1usize..7).prop_flat_map(|m| (validities(m), prop::collection::vec(ternary(), m)))
        ) {
            let stats = CueStats::from_validities(v).unwrap();
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            for rule in [Heuristic::Tal, Heuristic::Ttb] {
                let a = predict(rule, &x, &stats).unwrap();
                let b = predict(rule, &neg, &stats).unwrap();
                prop_assert_eq!(a.flipped(), b);
            }
        }

        #[test]
        fn column_permutation_equivariance(
            (rows, y, perm) in (2usize..6, 3usize..20).prop_flat_map(|(m, n)| (
                prop::collection::vec(prop::collection::vec(ternary(), m), n),
                prop::collection::vec(prop_oneof![Just(-1.0), Just(1.0)], n),
                Just((0..m).collect::<Vec<usize>>()).prop_shuffle(),
            ))
        ) {
            let x = DesignMatrix::from_rows(&rows).unwrap();
            let permuted: Vec<Vec<f64>> = rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
            let xp = DesignMatrix::from_rows(&permuted).unwrap();
            let y = DVector::from_vec(y);
            let s = cue_stats(&x, &y).unwrap();
            let sp = cue_stats(&xp, &y).unwrap();
            for (k, &j) in perm.iter().enumerate() {
                prop_assert_eq!(sp.validities()[k], s.validities()[j]);
                prop_assert_eq!(sp.directions()[k], s.directions()[j]);
            }
            // Choices are invariant whenever the permutation does not reorder
            // tied |v̂| (the index tie-break is not permutation invariant).
            let distinct = {
                let mut a: Vec<f64> = s.validities().iter().map(|v| v.abs()).collect();
                a.sort_by(f64::total_cmp);
                a.windows(2).all(|w| w[0] != w[1])
            };
            for (r, rp) in rows.iter().zip(&permuted) {
                prop_assert_eq!(tal_predict(r, &s).unwrap(), tal_predict(rp, &sp).unwrap());
                if distinct {
                    for (k, &j) in perm.iter().enumerate() {
                        prop_assert_eq!(sp.ranks()[k], s.ranks()[j]);
                    }
                    prop_assert_eq!(ttb_predict(r, &s).unwrap(), ttb_predict(rp, &sp).unwrap());
                }
            }
        }

        #[test]
        fn ttb_ignores_lower_ranked_cues(
            (v, x, noise) in (2usize..7).prop_flat_map(|m| (
                validities(m),
                prop::collection::vec(ternary(), m),
                prop::collection::vec(ternary(), m),
            ))
        ) {
            let stats = CueStats::from_validities(v).unwrap();
            let top = x.iter().enumerate().filter(|(_, &xj)| xj != 0.0).map(|(j, _)| stats.ranks()[j]).max();
            if let Some(top) = top {
                let altered: Vec<f64> = x.iter().zip(&noise).enumerate()
                    .map(|(j, (&xj, &nj))| if stats.ranks()[j] < top { nj } else { xj })
                    .collect();
                prop_assert_eq!(ttb_predict(&x, &stats).unwrap(), ttb_predict(&altered, &stats).unwrap());
            }
        }
    }
}
