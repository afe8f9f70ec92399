use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// P-spline settings shared by every smooth term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplineConfig {
    pub degree: usize,
    pub interior_knots: usize,
    pub penalty_order: usize,
    pub lambda: f64,
}

impl Default for SplineConfig {
    fn default() -> Self {
        Self { degree: 3, interior_knots: 20, penalty_order: 2, lambda: 1000.0 }
    }
}

impl SplineConfig {
    pub fn basis_size(&self) -> usize {
        self.interior_knots + 1 + self.degree
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("spline lambda must be finite and non-negative, got {}", self.lambda)));
        }
        if self.basis_size() <= self.penalty_order {
            return Err(Error::Config(format!(
                "basis size {} must exceed the penalty order {}",
                self.basis_size(),
                self.penalty_order
            )));
        }
        Ok(())
    }
}

/// B-spline basis on equally spaced knots covering `[lo, hi]`, extended by
/// `degree` knots on each side so the basis is complete on the range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    pub degree: usize,
    pub knots: Vec<f64>,
}

impl BSplineBasis {
    pub fn new(lo: f64, hi: f64, interior_knots: usize, degree: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Domain("spline range must be finite".into()));
        }
        // a constant predictor still gets a well-formed basis
        let hi = if hi > lo { hi } else { lo + 1.0 };
        let intervals = interior_knots + 1;
        let h = (hi - lo) / intervals as f64;
        let knots = (0..=intervals + 2 * degree)
            .map(|i| {
                let k = i as i64 - degree as i64;
                if k == intervals as i64 {
                    hi
                } else {
                    lo + k as f64 * h
                }
            })
            .collect();
        Ok(Self { degree, knots })
    }

    pub fn size(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Lower end of the range on which the basis sums to one.
    pub fn lower(&self) -> f64 {
        self.knots[self.degree]
    }

    pub fn upper(&self) -> f64 {
        self.knots[self.knots.len() - 1 - self.degree]
    }

    /// Span `s` with `t[s] <= x < t[s+1]`, kept within the basis range.
    fn span(&self, x: f64) -> usize {
        let t = &self.knots;
        let last_span = t.len() - self.degree - 2;
        let mut span = self.degree;
        while span < last_span && x >= t[span + 1] {
            span += 1;
        }
        span
    }

    /// The `q + 1` degree-`q` functions that can be non-zero on `span`,
    /// evaluated at `x` by Cox–de Boor.
    fn cox_de_boor(&self, x: f64, span: usize, q: usize) -> Vec<f64> {
        let t = &self.knots;
        let mut values = vec![0.0; q + 1];
        values[0] = 1.0;
        let mut left = vec![0.0; q + 1];
        let mut right = vec![0.0; q + 1];
        for j in 1..=q {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        values
    }

    /// Index of the first non-zero basis function and the `degree + 1`
    /// non-zero values at `x`. Outside the range each function continues
    /// along its tangent at the nearest end, so any fit extrapolates
    /// linearly and the penalty's linear null space stays linear everywhere.
    pub fn eval_nonzero(&self, x: f64) -> (usize, Vec<f64>) {
        let p = self.degree;
        let b = x.max(self.lower()).min(self.upper());
        let span = self.span(b);
        let mut values = self.cox_de_boor(b, span, p);
        if x != b && p > 0 {
            let t = &self.knots;
            let lower = self.cox_de_boor(b, span, p - 1);
            for (r, v) in values.iter_mut().enumerate() {
                let i = span - p + r;
                let a = if r > 0 { lower[r - 1] / (t[i + p] - t[i]) } else { 0.0 };
                let c = if r < p { lower[r] / (t[i + p + 1] - t[i + 1]) } else { 0.0 };
                *v += (x - b) * p as f64 * (a - c);
            }
        }
        (span - p, values)
    }
}

/// Dense basis row at `x`.
pub fn bspline_design(x: f64, basis: &BSplineBasis) -> Vec<f64> {
    let mut row = vec![0.0; basis.size()];
    let (start, values) = basis.eval_nonzero(x);
    row[start..start + values.len()].copy_from_slice(&values);
    row
}

/// `DᵀD` for the order-`order` difference operator on `k` coefficients,
/// row-major `k × k`.
pub fn difference_penalty(k: usize, order: usize) -> Result<Vec<f64>> {
    if k <= order {
        return Err(Error::Shape(format!("basis size {k} must exceed the difference order {order}")));
    }
    // rows of D: binomial coefficients with alternating signs
    let mut stencil = vec![1.0];
    for _ in 0..order {
        let mut next = vec![0.0; stencil.len() + 1];
        for (i, c) in stencil.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c;
        }
        stencil = next;
    }
    let rows = k - order;
    let mut p = vec![0.0; k * k];
    for r in 0..rows {
        for (a, ca) in stencil.iter().enumerate() {
            for (b, cb) in stencil.iter().enumerate() {
                p[(r + a) * k + r + b] += ca * cb;
            }
        }
    }
    Ok(p)
}

/// `βᵀ P β` for a row-major penalty.
pub fn quadratic_form(p: &[f64], beta: &[f64]) -> f64 {
    let k = beta.len();
    (0..k).map(|i| beta[i] * (0..k).map(|j| p[i * k + j] * beta[j]).sum::<f64>()).sum()
}
