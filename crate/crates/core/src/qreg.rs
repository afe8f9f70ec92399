//! Linear quantile regression solved exactly through its dual linear program
//!
//! ```text
//! max  yᵀd   subject to   Xᵀd = 0,   τ − 1 ≤ dᵢ ≤ τ
//! ```
//!
//! with a bounded-variable revised simplex. The regression coefficients are
//! the simplex multipliers of the equality rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Lu;
use crate::metrics::quantile_loss;

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRegModel {
    pub tau: f64,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl QuantileRegModel {
    /// Affine prediction, before the non-negativity clamp.
    pub fn linear_predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.coefficients.len() {
            return Err(Error::Shape(format!(
                "expected {} inputs, got {}",
                self.coefficients.len(),
                x.len()
            )));
        }
        Ok(self.intercept + x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>())
    }
}

/// Prediction floored at zero.
pub fn qr_predict(m: &QuantileRegModel, x: &[f64]) -> Result<f64> {
    m.linear_predict(x).map(|v| v.max(0.0))
}

pub fn pinball(tau: f64, z: f64, y: f64) -> f64 {
    quantile_loss(z, y, tau)
}

/// Mean pinball loss of affine predictions (no clamp) on `(rows, y)`.
pub fn mean_loss(m: &QuantileRegModel, rows: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (x, &v) in rows.iter().zip(y) {
        total += pinball(m.tau, m.linear_predict(x)?, v);
    }
    Ok(total / y.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
}

/// Bounded-variable simplex maximizing `cᵀx` subject to `A x = 0` and
/// `l ≤ x ≤ u`. Columns are stored densely, `m` entries each.
struct Simplex {
    m: usize,
    cols: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    eps: f64,
}

impl Simplex {
    fn n_vars(&self) -> usize {
        self.lower.len()
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.m..(j + 1) * self.m]
    }

    fn basis_lu(&self) -> Result<Lu> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for (i, v) in self.col(j).iter().enumerate() {
                b[i * m + k] = *v;
            }
        }
        Lu::factor(&b, m).ok_or_else(|| Error::Numeric("singular simplex basis".into()))
    }

    /// Recomputes basic values from the non-basic ones.
    fn refresh_basic(&mut self, lu: &Lu) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n_vars() {
            if self.status[j] != Status::Basic && self.x[j] != 0.0 {
                for (r, a) in rhs.iter_mut().zip(self.col(j)) {
                    *r -= a * self.x[j];
                }
            }
        }
        let xb = lu.solve(&rhs);
        for (k, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[k];
        }
    }

    /// Runs to optimality for costs `c`; returns the final multipliers.
    fn optimize(&mut self, c: &[f64], max_iter: usize) -> Result<Vec<f64>> {
        let mut degenerate_run = 0;
        for _ in 0..max_iter {
            let lu = self.basis_lu()?;
            self.refresh_basic(&lu);
            let cb: Vec<f64> = self.basis.iter().map(|&j| c[j]).collect();
            let pi = lu.solve_transpose(&cb);
            let bland = degenerate_run >= DEGENERATE_LIMIT;

            // entering variable: most attractive reduced cost, lowest index on ties
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.n_vars() {
                let st = self.status[j];
                if st == Status::Basic || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let d = c[j] - self.col(j).iter().zip(&pi).map(|(a, p)| a * p).sum::<f64>();
                let improving = (st == Status::Lower && d > self.eps) || (st == Status::Upper && d < -self.eps);
                if !improving {
                    continue;
                }
                if bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d.abs() > best.abs()) {
                    entering = Some((j, d));
                }
            }
            let Some((q, dq)) = entering else {
                return Ok(pi);
            };
            let dir = if dq > 0.0 { 1.0 } else { -1.0 };
            // basic values move by -dir * t * B⁻¹ a_q
            let alpha = lu.solve(self.col(q));
            let mut step = self.upper[q] - self.lower[q];
            let mut leaving: Option<(usize, bool)> = None;
            for (k, &j) in self.basis.iter().enumerate() {
                let rate = -dir * alpha[k];
                let tol = 1e-12;
                let (limit, to_upper) = if rate > tol {
                    ((self.upper[j] - self.x[j]) / rate, true)
                } else if rate < -tol {
                    ((self.lower[j] - self.x[j]) / rate, false)
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = match leaving {
                    None => limit < step,
                    Some((lk, _)) => limit < step || (limit == step && j < self.basis[lk]),
                };
                if better {
                    step = limit;
                    leaving = Some((k, to_upper));
                }
            }
            if !step.is_finite() {
                return Err(Error::Numeric("unbounded quantile regression program".into()));
            }
            degenerate_run = if step <= 0.0 { degenerate_run + 1 } else { 0 };
            self.x[q] += dir * step;
            for (k, &j) in self.basis.iter().enumerate() {
                self.x[j] -= dir * step * alpha[k];
            }
            match leaving {
                None => {
                    // bound flip
                    self.status[q] = if dir > 0.0 { Status::Upper } else { Status::Lower };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Some((k, to_upper)) => {
                    let out = self.basis[k];
                    self.status[out] = if to_upper { Status::Upper } else { Status::Lower };
                    self.x[out] = if to_upper { self.upper[out] } else { self.lower[out] };
                    self.status[q] = Status::Basic;
                    self.basis[k] = q;
                }
            }
        }
        Err(Error::Numeric(format!("simplex did not converge in {max_iter} iterations")))
    }
}

/// Fits `y ≈ β₀ + Xβ` at level `tau` by exact minimization of the pinball
/// loss. With `intercept = false`, `β₀` is fixed at zero.
pub fn fit_qr_with(rows: &[Vec<f64>], y: &[f64], tau: f64, intercept: bool) -> Result<QuantileRegModel> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!("tau must lie in (0, 1), got {tau}")));
    }
    let n = y.len();
    if rows.len() != n {
        return Err(Error::Shape(format!("{} rows but {n} observations", rows.len())));
    }
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::Shape("rows have unequal lengths".into()));
    }
    if n < p + 1 {
        return Err(Error::Size(format!("{n} observations cannot fit {} coefficients", p + 1)));
    }
    if rows.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite input to quantile regression".into()));
    }
    let m = p + usize::from(intercept);
    if m == 0 {
        return Ok(QuantileRegModel { tau, intercept: 0.0, coefficients: Vec::new() });
    }

    // columns of Xᵀ, then one artificial per row
    let mut cols = Vec::with_capacity((n + m) * m);
    for r in rows {
        if intercept {
            cols.push(1.0);
        }
        cols.extend_from_slice(r);
    }
    let mut lower = vec![tau - 1.0; n];
    let mut upper = vec![tau; n];

    // start every observation at the bound matching its side of the
    // unconditional tau-quantile
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q0 = sorted[((tau * n as f64).ceil() as usize).clamp(1, n) - 1];
    let mut x: Vec<f64> = y.iter().map(|&v| if v > q0 { tau } else { tau - 1.0 }).collect();
    let mut status: Vec<Status> = y.iter().map(|&v| if v > q0 { Status::Upper } else { Status::Lower }).collect();

    let mut residual = vec![0.0; m];
    for (j, xj) in x.iter().enumerate() {
        for (i, r) in residual.iter_mut().enumerate() {
            *r -= cols[j * m + i] * xj;
        }
    }
    let mut basis = Vec::with_capacity(m);
    for (i, r) in residual.iter().enumerate() {
        let sign = if *r >= 0.0 { 1.0 } else { -1.0 };
        for k in 0..m {
            cols.push(if k == i { sign } else { 0.0 });
        }
        lower.push(0.0);
        upper.push(f64::INFINITY);
        x.push(r.abs());
        status.push(Status::Basic);
        basis.push(n + i);
    }

    let scale = y.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let mut s = Simplex { m, cols, lower, upper, x, status, basis, eps: 1e-11 * scale };
    let max_iter = 50 * (n + m) + 1000;

    let phase1: Vec<f64> = (0..n + m).map(|j| if j < n { 0.0 } else { -1.0 }).collect();
    let eps = s.eps;
    s.eps = 1e-12;
    s.optimize(&phase1, max_iter)?;
    s.eps = eps;
    let infeasibility: f64 = s.x[n..].iter().sum();
    if infeasibility > 1e-8 * n as f64 {
        return Err(Error::Numeric(format!("phase one left infeasibility {infeasibility}")));
    }
    for j in n..n + m {
        s.upper[j] = 0.0;
        if s.status[j] != Status::Basic {
            s.status[j] = Status::Lower;
            s.x[j] = 0.0;
        }
    }

    let phase2: Vec<f64> = (0..n + m).map(|j| if j < n { y[j] } else { 0.0 }).collect();
    let pi = s.optimize(&phase2, max_iter)?;
    let (b0, coefficients) = if intercept { (pi[0], pi[1..].to_vec()) } else { (0.0, pi) };
    if !b0.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric("non-finite quantile regression coefficients".into()));
    }
    Ok(QuantileRegModel { tau, intercept: b0, coefficients })
}

/// [`fit_qr_with`] including an intercept.
pub fn fit_qr(rows: &[Vec<f64>], y: &[f64], tau: f64) -> Result<QuantileRegModel> {
    fit_qr_with(rows, y, tau, true)
}
