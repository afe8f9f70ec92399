//! Quantile matrices, the 17-algorithm roster, mean/median combiners and
//! stacked generalization with linear quantile regression.

pub mod roster;
pub mod runner;
pub mod stack;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use roster::{roster, AlgorithmKind, AlgorithmSpec};
pub use runner::{run_all_algorithms, AlgorithmResult, ExperimentSettings, RunOutput};
pub use stack::{fit_combiners, stack_apply, stack_fit, stack_predict, StackedModel};

use crate::dist::{quantile, PredictiveDistribution};
use crate::error::{Error, Result};

pub const DEFAULT_LEVELS: [f64; 17] = [
    0.0125, 0.025, 0.05, 0.075, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.925, 0.95, 0.975, 0.9875,
];

/// Strictly increasing quantile levels in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TauGrid(Vec<f64>);

impl TauGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("tau grid must not be empty".into()));
        }
        if let Some(t) = levels.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::Config(format!("tau level {t} lies outside (0, 1)")));
        }
        if let Some(w) = levels.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!("tau levels must increase strictly, found {} then {}", w[0], w[1])));
        }
        Ok(Self(levels))
    }

    pub fn levels(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for TauGrid {
    fn default() -> Self {
        Self(DEFAULT_LEVELS.to_vec())
    }
}

impl TryFrom<Vec<f64>> for TauGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TauGrid> for Vec<f64> {
    fn from(g: TauGrid) -> Self {
        g.0
    }
}

/// Predicted quantiles: one row per sample, one column per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileMatrix {
    n_cols: usize,
    data: Vec<f64>,
}

impl QuantileMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, n_cols: usize) -> Result<Self> {
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Shape(format!("every row must have {n_cols} columns")));
        }
        Ok(Self { n_cols, data: rows.into_iter().flatten().collect() })
    }

    pub fn n_rows(&self) -> usize {
        self.data.len().checked_div(self.n_cols).unwrap_or(0)
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_cols.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Every row non-decreasing and every entry non-negative and finite.
    pub fn is_valid(&self) -> bool {
        self.rows().all(|r| r.iter().all(|v| v.is_finite() && *v >= 0.0) && r.windows(2).all(|w| w[0] <= w[1]))
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.n_cols == other.n_cols && self.data.len() == other.data.len()
    }
}

/// Sorts a row ascending (monotone rearrangement of crossing quantiles).
pub fn rearrange_noncrossing(row: &[f64]) -> Vec<f64> {
    let mut r = row.to_vec();
    r.sort_by(f64::total_cmp);
    r
}

/// Quantiles of each predictive distribution at every grid level.
pub fn extract_quantiles(preds: &[PredictiveDistribution], grid: &TauGrid) -> Result<QuantileMatrix> {
    let rows: Vec<Vec<f64>> = preds
        .par_iter()
        .map(|p| grid.levels().iter().map(|&t| quantile(p.family, t, &p.params)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    QuantileMatrix::from_rows(rows, grid.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineKind {
    Mean,
    Median,
}

/// Entrywise mean or median of `inputs`, then per-row rearrangement.
pub fn combine_simple(kind: CombineKind, inputs: &[&QuantileMatrix]) -> Result<QuantileMatrix> {
    let first = inputs.first().ok_or_else(|| Error::Shape("no matrices to combine".into()))?;
    if inputs.len() < 2 {
        return Err(Error::Shape("combining needs at least two matrices".into()));
    }
    if inputs.iter().any(|m| !m.same_shape(first)) {
        return Err(Error::Shape("combined matrices must share their shape".into()));
    }
    let k = inputs.len() as f64;
    let mut data: Vec<f64> = (0..first.data.len())
        .map(|e| {
            let mut vals: Vec<f64> = inputs.iter().map(|m| m.data[e]).collect();
            match kind {
                CombineKind::Mean => vals.iter().sum::<f64>() / k,
                CombineKind::Median => median(&mut vals),
            }
        })
        .collect();
    for row in data.chunks_mut(first.n_cols.max(1)) {
        row.sort_by(f64::total_cmp);
    }
    Ok(QuantileMatrix { n_cols: first.n_cols, data })
}

/// Median with the middle-pair average for even lengths.
pub fn median(vals: &mut [f64]) -> f64 {
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    }
}
