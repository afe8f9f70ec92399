use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{extract_quantiles, QuantileMatrix, TauGrid};
use crate::error::{Error, Result};
use crate::features::Dataset;
use crate::model::{fit_base, BaseLearner, FittedModel, LearnerSettings};
use crate::qreg::{fit_qr, pinball, qr_predict, QuantileRegModel};

/// One quantile-regression combiner per level, trained on held-out base
/// quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    pub bases: Vec<BaseLearner>,
    pub grid: TauGrid,
    pub combiners: Vec<QuantileRegModel>,
    /// Mean pinball loss of each combiner on its training rows.
    pub train_loss: Vec<f64>,
    /// `base_train_loss[k][j]`: the same loss for base `k` used alone.
    pub base_train_loss: Vec<Vec<f64>>,
}

fn check_inputs(matrices: &[&QuantileMatrix], n_bases: usize, n_levels: usize) -> Result<usize> {
    if matrices.len() != n_bases {
        return Err(Error::Shape(format!("expected {n_bases} base matrices, got {}", matrices.len())));
    }
    let n = matrices.first().map_or(0, |m| m.n_rows());
    if matrices.iter().any(|m| m.n_rows() != n || m.n_cols() != n_levels) {
        return Err(Error::Shape(format!("base matrices must all be {n} x {n_levels}")));
    }
    Ok(n)
}

fn level_rows(matrices: &[&QuantileMatrix], n: usize, j: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| matrices.iter().map(|m| m.get(i, j)).collect()).collect()
}

/// Fits the per-level combiners from base quantiles on held-out rows.
pub fn fit_combiners(
    bases: &[BaseLearner],
    held_out: &[&QuantileMatrix],
    y: &[f64],
    grid: &TauGrid,
) -> Result<StackedModel> {
    if bases.is_empty() {
        return Err(Error::Shape("stacking needs at least one base learner".into()));
    }
    let n = check_inputs(held_out, bases.len(), grid.len())?;
    if y.len() != n {
        return Err(Error::Shape(format!("{} targets for {n} quantile rows", y.len())));
    }
    let fitted: Vec<(QuantileRegModel, f64, Vec<f64>)> = grid
        .levels()
        .par_iter()
        .enumerate()
        .map(|(j, &tau)| {
            let rows = level_rows(held_out, n, j);
            let m = fit_qr(&rows, y, tau)?;
            let mut loss = 0.0;
            let mut base_loss = vec![0.0; bases.len()];
            for (r, &v) in rows.iter().zip(y) {
                loss += pinball(tau, m.linear_predict(r)?, v);
                for (acc, &q) in base_loss.iter_mut().zip(r) {
                    *acc += pinball(tau, q, v);
                }
            }
            let n = n as f64;
            Ok((m, loss / n, base_loss.into_iter().map(|l| l / n).collect()))
        })
        .collect::<Result<_>>()?;
    let mut combiners = Vec::with_capacity(grid.len());
    let mut train_loss = Vec::with_capacity(grid.len());
    let mut base_train_loss = vec![Vec::with_capacity(grid.len()); bases.len()];
    for (m, l, bl) in fitted {
        combiners.push(m);
        train_loss.push(l);
        for (acc, v) in base_train_loss.iter_mut().zip(bl) {
            acc.push(v);
        }
    }
    Ok(StackedModel { bases: bases.to_vec(), grid: grid.clone(), combiners, train_loss, base_train_loss })
}

/// Applies the combiners to base quantiles, clamps at zero and rearranges.
pub fn stack_apply(m: &StackedModel, base_quantiles: &[&QuantileMatrix]) -> Result<QuantileMatrix> {
    let n = check_inputs(base_quantiles, m.bases.len(), m.grid.len())?;
    let rows = (0..n)
        .map(|i| {
            let mut row = Vec::with_capacity(m.grid.len());
            let mut x = vec![0.0; m.bases.len()];
            for (j, c) in m.combiners.iter().enumerate() {
                for (xk, b) in x.iter_mut().zip(base_quantiles) {
                    *xk = b.get(i, j);
                }
                row.push(qr_predict(c, &x)?);
            }
            row.sort_by(f64::total_cmp);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    QuantileMatrix::from_rows(rows, m.grid.len())
}

/// Stacked quantiles for `x` from base learners refitted elsewhere.
pub fn stack_predict(m: &StackedModel, refitted: &[&FittedModel], x: &Dataset) -> Result<QuantileMatrix> {
    let mats = refitted
        .iter()
        .map(|f| extract_quantiles(&f.predict_dataset(x)?, &m.grid))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&QuantileMatrix> = mats.iter().collect();
    stack_apply(m, &refs)
}

fn row_key(d: &Dataset, i: usize) -> Vec<u64> {
    std::iter::once(d.targets()[i].to_bits()).chain(d.row(i).iter().map(|v| v.to_bits())).collect()
}

/// Fails when any sample of `a` also appears in `b`.
pub fn check_disjoint(a: &Dataset, b: &Dataset) -> Result<()> {
    let seen: HashSet<Vec<u64>> = (0..a.len()).map(|i| row_key(a, i)).collect();
    if let Some(i) = (0..b.len()).find(|&i| seen.contains(&row_key(b, i))) {
        return Err(Error::Precondition(format!(
            "combiner training set shares sample {i} with the base training set"
        )));
    }
    Ok(())
}

/// Fits the bases on `set1`, predicts `set2` and trains the combiners there.
pub fn stack_fit(
    set1: &Dataset,
    set2: &Dataset,
    bases: &[BaseLearner],
    grid: &TauGrid,
    settings: &LearnerSettings,
    seed: u64,
) -> Result<StackedModel> {
    check_disjoint(set1, set2)?;
    let mats = bases
        .par_iter()
        .map(|&b| {
            let model = fit_base(b, set1, settings, seed)
                .map_err(|e| Error::Fit(format!("base learner {b} failed: {e}")))?;
            extract_quantiles(&model.predict_dataset(set2)?, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&QuantileMatrix> = mats.iter().collect();
    fit_combiners(bases, &refs, set2.targets(), grid)
}
