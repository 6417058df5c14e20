//! Loading cue tables and turning them into ternary datasets.

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::DesignMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    PairedComparison,
    Classification,
}

/// Ternary cues with a ±1 outcome per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TernaryDataset {
    pub x: DesignMatrix,
    pub y: DVector<f64>,
    pub cue_names: Vec<String>,
    pub kind: DatasetKind,
}

impl TernaryDataset {
    pub fn new(
        x: DesignMatrix,
        y: DVector<f64>,
        cue_names: Vec<String>,
        kind: DatasetKind,
    ) -> Result<Self> {
        if y.len() != x.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} outcomes for {} rows",
                y.len(),
                x.n()
            )));
        }
        if cue_names.len() != x.m() {
            return Err(Error::DimensionMismatch(format!(
                "{} cue names for {} columns",
                cue_names.len(),
                x.m()
            )));
        }
        if x.iter().any(|&v| v != -1.0 && v != 0.0 && v != 1.0) {
            return Err(Error::invalid("cue values must be in {-1, 0, 1}"));
        }
        if y.iter().any(|&v| v != -1.0 && v != 1.0) {
            return Err(Error::invalid("outcomes must be -1 or +1"));
        }
        Ok(Self {
            x,
            y,
            cue_names,
            kind,
        })
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn m(&self) -> usize {
        self.x.m()
    }
}

/// Numeric cue columns plus the raw text of the target column.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub cue_names: Vec<String>,
    /// `n × m`, one row per observation.
    pub cues: DMatrix<f64>,
    pub target: Vec<String>,
    /// Rows dropped because a value was missing.
    pub dropped_rows: usize,
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.trim(),
        "" | "?" | "NA" | "na" | "N/A" | "NaN" | "nan" | "null" | "NULL"
    )
}

/// Reads a CSV with a header row. `target` names the criterion or label
/// column; every other column is a numeric cue. Rows with a missing value
/// anywhere are dropped.
pub fn read_table<R: Read>(reader: R, target: &str) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let target_idx = headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::Config(format!("column '{target}' not found in header")))?;
    let cue_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    if cue_names.is_empty() {
        return Err(Error::data(Some(1), "no cue columns besides the target"));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut dropped_rows = 0;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line());
        if record.iter().any(is_missing) {
            dropped_rows += 1;
            continue;
        }
        for (i, cell) in record.iter().enumerate() {
            if i == target_idx {
                labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::data(line, format!("cue '{}' is not numeric: '{cell}'", headers[i].to_string()))
            })?;
            if !v.is_finite() {
                return Err(Error::data(line, format!("non-finite value in '{}'", &headers[i])));
            }
            values.push(v);
        }
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::data(None, "no complete rows"));
    }
    Ok(RawTable {
        cues: DMatrix::from_row_slice(n, cue_names.len(), &values),
        cue_names,
        target: labels,
        dropped_rows,
    })
}

/// How a median split codes a value relative to the column median.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedianRule {
    /// Above → 1, at or below → 0 (items before pairwise differencing).
    Binary,
    /// Above → +1, below → −1, equal → 0.
    Ternary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedianSplit {
    pub values: DMatrix<f64>,
    pub medians: Vec<f64>,
    /// Columns with a single distinct value; coded as all zeros.
    pub constant_columns: Vec<usize>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn median_split(raw: &DMatrix<f64>, rule: MedianRule) -> Result<MedianSplit> {
    if raw.nrows() == 0 || raw.ncols() == 0 {
        return Err(Error::invalid("median split needs a non-empty table"));
    }
    let mut values = DMatrix::zeros(raw.nrows(), raw.ncols());
    let mut medians = Vec::with_capacity(raw.ncols());
    let mut constant_columns = Vec::new();
    for (j, col) in raw.column_iter().enumerate() {
        let col: Vec<f64> = col.iter().copied().collect();
        let med = median(&col);
        medians.push(med);
        if col.iter().all(|&v| v == col[0]) {
            constant_columns.push(j);
            continue;
        }
        for (i, &v) in col.iter().enumerate() {
            values[(i, j)] = match rule {
                MedianRule::Binary => f64::from(u8::from(v > med)),
                MedianRule::Ternary => {
                    if v > med {
                        1.0
                    } else if v < med {
                        -1.0
                    } else {
                        0.0
                    }
                }
            };
        }
    }
    Ok(MedianSplit {
        values,
        medians,
        constant_columns,
    })
}

/// Difference coding of one comparison: `(right − left, outcome)`, where the
/// outcome is `+1` when the right item has the higher criterion.
pub fn encode_pair(left: &[f64], right: &[f64], crit_left: f64, crit_right: f64) -> (Vec<f64>, f64) {
    let x = left.iter().zip(right).map(|(l, r)| r - l).collect();
    let y = if crit_right > crit_left { 1.0 } else { -1.0 };
    (x, y)
}

/// Every unordered pair of items with distinct criteria, once, with a fair
/// coin deciding which item is shown on the right.
pub fn pairwise_encode<R: Rng + ?Sized>(
    items: &DMatrix<f64>,
    criterion: &[f64],
    cue_names: Vec<String>,
    rng: &mut R,
) -> Result<TernaryDataset> {
    let n = items.nrows();
    if n < 2 {
        return Err(Error::invalid("pairwise encoding needs at least two items"));
    }
    if criterion.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} criterion values for {n} items",
            criterion.len()
        )));
    }
    if items.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("pairwise encoding expects binary cues"));
    }
    let m = items.ncols();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| items.row(i).iter().copied().collect())
        .collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if criterion[a] == criterion[b] {
                continue;
            }
            let (l, r) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            let (x, y) = encode_pair(&rows[l], &rows[r], criterion[l], criterion[r]);
            xs.extend(x);
            ys.push(y);
        }
    }
    let pairs = ys.len();
    if pairs == 0 {
        return Err(Error::invalid("all items share the same criterion value"));
    }
    TernaryDataset::new(
        DesignMatrix::new(DMatrix::from_row_slice(pairs, m, &xs))?,
        DVector::from_vec(ys),
        cue_names,
        DatasetKind::PairedComparison,
    )
}

/// Paired-comparison dataset from a raw table with a numeric criterion.
pub fn paired_dataset_from_table<R: Rng + ?Sized>(raw: &RawTable, rng: &mut R) -> Result<TernaryDataset> {
    let criterion = raw
        .target
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::data(None, format!("criterion value '{s}' in data row {} is not numeric", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let split = median_split(&raw.cues, MedianRule::Binary)?;
    pairwise_encode(&split.values, &criterion, raw.cue_names.clone(), rng)
}

/// Maps a two-valued label column to ±1. Unless `positive` names the `+1`
/// label, the larger of the two (numerically when both parse) is `+1`.
pub fn binary_labels(target: &[String], positive: Option<&str>) -> Result<DVector<f64>> {
    let mut distinct: Vec<&str> = Vec::new();
    for t in target {
        if !distinct.contains(&t.as_str()) {
            distinct.push(t);
        }
    }
    match distinct.len() {
        0 => return Err(Error::data(None, "no labels")),
        1 => return Err(Error::data(None, format!("label column is constant ('{}')", distinct[0]))),
        2 => {}
        k => return Err(Error::data(None, format!("label column is not binary: {k} distinct values"))),
    }
    let pos = match positive {
        Some(p) => {
            if !distinct.contains(&p) {
                return Err(Error::Config(format!("positive label '{p}' does not occur in the data")));
            }
            p
        }
        None => {
            let (a, b) = (distinct[0], distinct[1]);
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    if x > y {
                        a
                    } else {
                        b
                    }
                }
                _ => a.max(b),
            }
        }
    };
    Ok(DVector::from_iterator(
        target.len(),
        target.iter().map(|t| if t == pos { 1.0 } else { -1.0 }),
    ))
}

/// Classification dataset: ternary median split of the cues, no pairing.
pub fn classification_dataset_from_table(raw: &RawTable, positive: Option<&str>) -> Result<TernaryDataset> {
    let y = binary_labels(&raw.target, positive)?;
    let split = median_split(&raw.cues, MedianRule::Ternary)?;
    TernaryDataset::new(
        DesignMatrix::new(split.values)?,
        y,
        raw.cue_names.clone(),
        DatasetKind::Classification,
    )
}
