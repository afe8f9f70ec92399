//! Penalized maximum likelihood for the three zero-adjusted parameters.
//!
//! Coefficients of `mu`, `sigma` and `nu` are updated cyclically. Each update
//! is one Fisher-scoring step on the linked scale with the quadratic penalty
//! folded in, followed by step halving until the penalized log-likelihood
//! does not decrease.

use serde::{Deserialize, Serialize};

use crate::dist::{ln_density_unchecked, Family, ZeroAdjustedParams, LOG_DENSITY_FLOOR};
use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;
use crate::special;

use super::bspline::quadratic_form;

/// Added to the diagonal of every per-parameter system before solving.
pub const HESSIAN_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Mu = 0,
    Sigma = 1,
    Nu = 2,
}

impl Param {
    pub const ALL: [Param; 3] = [Param::Mu, Param::Sigma, Param::Nu];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitControls {
    pub max_outer: usize,
    pub tol: f64,
    pub max_halvings: usize,
}

impl Default for FitControls {
    fn default() -> Self {
        Self { max_outer: 200, tol: 1e-8, max_halvings: 20 }
    }
}

/// Row-compressed design matrix.
#[derive(Debug, Clone, Default)]
pub struct SparseDesign {
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseDesign {
    pub fn new(n_cols: usize) -> Self {
        Self { n_cols, row_ptr: vec![0], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (c, v) in entries {
            debug_assert!(c < self.n_cols);
            self.cols.push(c as u32);
            self.vals.push(v);
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut d = Self::new(n_cols);
        for r in rows {
            d.push_row(r.iter().copied().enumerate());
        }
        d
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn dot(&self, i: usize, beta: &[f64]) -> f64 {
        let (c, v) = self.row(i);
        c.iter().zip(v).map(|(&c, v)| v * beta[c as usize]).sum()
    }

    fn mul(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.dot(i, beta)).collect()
    }
}

/// Design and penalty for one distribution parameter.
#[derive(Debug, Clone)]
pub struct Block {
    pub design: SparseDesign,
    /// Row-major `n_cols × n_cols` penalty, if any.
    pub penalty: Option<Vec<f64>>,
    pub lambda: f64,
}

impl Block {
    pub fn unpenalized(design: SparseDesign) -> Self {
        Self { design, penalty: None, lambda: 0.0 }
    }

    fn penalty_value(&self, beta: &[f64]) -> f64 {
        match &self.penalty {
            Some(p) if self.lambda > 0.0 => 0.5 * self.lambda * quadratic_form(p, beta),
            _ => 0.0,
        }
    }

    /// `λ P β`
    fn penalty_gradient(&self, beta: &[f64]) -> Vec<f64> {
        let k = beta.len();
        match &self.penalty {
            Some(p) if self.lambda > 0.0 => (0..k)
                .map(|i| self.lambda * (0..k).map(|j| p[i * k + j] * beta[j]).sum::<f64>())
                .collect(),
            _ => vec![0.0; k],
        }
    }
}

pub type Coefs = [Vec<f64>; 3];

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub coefs: Coefs,
    /// Penalized log-likelihood at the start and after every outer iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Score and expected information of one observation's log-density with
/// respect to the linear predictor of `param`.
fn score_and_information(family: Family, param: Param, y: f64, p: &ZeroAdjustedParams) -> (f64, f64) {
    if param == Param::Nu {
        let nu = p.nu();
        let indicator = if y == 0.0 { 1.0 } else { 0.0 };
        return (indicator - nu, nu * (1.0 - nu));
    }
    if y == 0.0 {
        return (0.0, 0.0);
    }
    let (mu, sigma) = (p.mu(), p.sigma());
    let s2 = sigma * sigma;
    match (family, param) {
        (Family::Zaga, Param::Mu) => ((y - mu) / (s2 * mu), 1.0 / s2),
        (Family::Zaga, Param::Sigma) => {
            let a = 1.0 / s2;
            let r = y / mu;
            // d/da ln f = ln(y/mu) - y/mu + 1 + ln a - ψ(a); da/dη = -2a
            let dl_da = r.ln() - r + 1.0 + special::ln_minus_digamma(a);
            (-2.0 * a * dl_da, 4.0 * a * a * special::trigamma_minus_recip(a))
        }
        (Family::Zaig, Param::Mu) => ((y - mu) / (s2 * mu * mu), 1.0 / (s2 * mu)),
        (Family::Zaig, Param::Sigma) => {
            let d = y - mu;
            (-1.0 + d * d / (mu * mu * s2 * y), 2.0)
        }
        (_, Param::Nu) => unreachable!(),
    }
}

/// The penalized likelihood for one dataset and three parameter blocks.
#[derive(Debug, Clone)]
pub struct PenalizedProblem {
    pub family: Family,
    pub y: Vec<f64>,
    pub weights: Vec<f64>,
    pub blocks: [Block; 3],
}

impl PenalizedProblem {
    pub fn new(family: Family, y: Vec<f64>, weights: Option<Vec<f64>>, blocks: [Block; 3]) -> Result<Self> {
        let n = y.len();
        let weights = weights.unwrap_or_else(|| vec![1.0; n]);
        if weights.len() != n || blocks.iter().any(|b| b.design.n_rows() != n) {
            return Err(Error::Shape("design rows, weights and observations must have equal length".into()));
        }
        Ok(Self { family, y, weights, blocks })
    }

    fn params_at(&self, etas: &[Vec<f64>; 3], i: usize) -> ZeroAdjustedParams {
        ZeroAdjustedParams::from_linear_predictors(etas[0][i], etas[1][i], etas[2][i])
    }

    fn log_likelihood(&self, etas: &[Vec<f64>; 3]) -> f64 {
        (0..self.y.len())
            .filter(|&i| self.weights[i] != 0.0)
            .map(|i| {
                let p = self.params_at(etas, i);
                self.weights[i] * ln_density_unchecked(self.family, self.y[i], &p).max(LOG_DENSITY_FLOOR)
            })
            .sum()
    }

    fn etas(&self, coefs: &Coefs) -> [Vec<f64>; 3] {
        std::array::from_fn(|b| self.blocks[b].design.mul(&coefs[b]))
    }

    fn penalty(&self, coefs: &Coefs) -> f64 {
        self.blocks.iter().zip(coefs).map(|(b, c)| b.penalty_value(c)).sum()
    }

    /// Penalized log-likelihood.
    pub fn objective(&self, coefs: &Coefs) -> f64 {
        self.log_likelihood(&self.etas(coefs)) - self.penalty(coefs)
    }

    /// Analytic gradient of [`objective`](Self::objective) for each block.
    pub fn gradient(&self, coefs: &Coefs) -> Coefs {
        let etas = self.etas(coefs);
        std::array::from_fn(|b| {
            let mut g = self.blocks[b].penalty_gradient(&coefs[b]);
            g.iter_mut().for_each(|v| *v = -*v);
            self.accumulate(&etas, Param::ALL[b], &mut g, None);
            g
        })
    }

    /// Adds `Xᵀ(w u)` to `grad` and, if given, `Xᵀ W X` to `info`.
    fn accumulate(&self, etas: &[Vec<f64>; 3], param: Param, grad: &mut [f64], mut info: Option<&mut [f64]>) {
        let design = &self.blocks[param as usize].design;
        let k = design.n_cols();
        for i in 0..self.y.len() {
            let w = self.weights[i];
            if w == 0.0 || (param != Param::Nu && self.y[i] == 0.0) {
                continue;
            }
            let p = self.params_at(etas, i);
            let (mut u, fisher) = score_and_information(self.family, param, self.y[i], &p);
            if ln_density_unchecked(self.family, self.y[i], &p) < LOG_DENSITY_FLOOR {
                u = 0.0;
            }
            let (cols, vals) = design.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                grad[c as usize] += w * u * v;
            }
            if let Some(h) = info.as_deref_mut() {
                let wf = w * fisher;
                for (&ca, &va) in cols.iter().zip(vals) {
                    let row = ca as usize * k;
                    for (&cb, &vb) in cols.iter().zip(vals) {
                        h[row + cb as usize] += wf * va * vb;
                    }
                }
            }
        }
    }

    /// Cyclic penalized Fisher scoring from `init`.
    pub fn fit(&self, init: Coefs, controls: &FitControls) -> Result<FitOutcome> {
        for (b, c) in init.iter().enumerate() {
            if c.len() != self.blocks[b].design.n_cols() {
                return Err(Error::Shape(format!("initial coefficients for block {b} have the wrong length")));
            }
        }
        let mut coefs = init;
        let mut etas = self.etas(&coefs);
        let mut obj = self.log_likelihood(&etas) - self.penalty(&coefs);
        if !obj.is_finite() {
            return Err(Error::Fit("objective is not finite at the starting values".into()));
        }
        let mut trace = vec![obj];
        let mut converged = false;

        for _ in 0..controls.max_outer {
            let start = obj;
            for param in Param::ALL {
                let b = param as usize;
                let block = &self.blocks[b];
                let k = block.design.n_cols();
                let mut grad: Vec<f64> = block.penalty_gradient(&coefs[b]).iter().map(|v| -v).collect();
                let mut info = vec![0.0; k * k];
                self.accumulate(&etas, param, &mut grad, Some(&mut info));
                if let (Some(p), true) = (&block.penalty, block.lambda > 0.0) {
                    for (h, pv) in info.iter_mut().zip(p) {
                        *h += block.lambda * pv;
                    }
                }
                for j in 0..k {
                    info[j * k + j] += HESSIAN_RIDGE;
                }
                let step = cholesky_solve(&info, k, &grad).ok_or_else(|| {
                    Error::Fit(format!("{param:?} information matrix is singular even after ridge"))
                })?;
                if step.iter().any(|s| !s.is_finite()) {
                    return Err(Error::Fit(format!("non-finite {param:?} update")));
                }

                let mut scale = 1.0;
                for _ in 0..=controls.max_halvings {
                    let trial: Vec<f64> = coefs[b].iter().zip(&step).map(|(c, s)| c + scale * s).collect();
                    let trial_eta = block.design.mul(&trial);
                    let saved_eta = std::mem::replace(&mut etas[b], trial_eta);
                    let saved_coef = std::mem::replace(&mut coefs[b], trial);
                    let trial_obj = self.log_likelihood(&etas) - self.penalty(&coefs);
                    if trial_obj.is_finite() && trial_obj >= obj {
                        obj = trial_obj;
                        break;
                    }
                    etas[b] = saved_eta;
                    coefs[b] = saved_coef;
                    scale *= 0.5;
                }
            }
            trace.push(obj);
            if obj - start < controls.tol {
                converged = true;
                break;
            }
        }
        Ok(FitOutcome { coefs, trace, converged })
    }
}
