//! GAMLSS for zero-adjusted targets with linear or P-spline predictors.

pub mod bspline;
pub mod engine;

use serde::{Deserialize, Serialize};

pub use bspline::{bspline_design, difference_penalty, BSplineBasis, SplineConfig};
pub use engine::{Block, FitControls, FitOutcome, Param, PenalizedProblem, SparseDesign};

use crate::dist::{link, Family, ZeroAdjustedParams};
use crate::error::{Error, Result};
use crate::features::{Dataset, N_PREDICTORS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GamlssMode {
    Linear,
    Splines,
}

/// Per-predictor z-score transform learned on the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(d: &Dataset) -> Self {
        let n = d.len().max(1) as f64;
        let (mut mean, mut sd) = (Vec::new(), Vec::new());
        for j in 0..N_PREDICTORS {
            let col = d.column(j);
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            mean.push(m);
            sd.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Self { mean, sd }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.sd).map(|((v, m), s)| (v - m) / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub outer_iterations: usize,
    /// Penalized log-likelihood at the start and after each outer iteration.
    pub trace: Vec<f64>,
}

impl FitDiagnostics {
    fn from_outcome(o: &FitOutcome) -> Self {
        Self { converged: o.converged, outer_iterations: o.trace.len() - 1, trace: o.trace.clone() }
    }

    pub fn objective(&self) -> f64 {
        *self.trace.last().expect("trace holds the starting value")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGamlssModel {
    pub family: Family,
    pub beta_mu: Vec<f64>,
    pub beta_sigma: Vec<f64>,
    pub beta_nu: Vec<f64>,
    pub standardizer: Standardizer,
    pub diagnostics: FitDiagnostics,
}

/// Coefficients are laid out as `[intercept, basis of predictor 0, basis of
/// predictor 1, ...]`. The first coefficient of every predictor's basis is
/// held at zero; the penalty ignores constant shifts, so this only removes
/// the redundancy between the intercept and each basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineGamlssModel {
    pub family: Family,
    pub config: SplineConfig,
    pub bases: Vec<BSplineBasis>,
    pub beta_mu: Vec<f64>,
    pub beta_sigma: Vec<f64>,
    pub beta_nu: Vec<f64>,
    pub standardizer: Standardizer,
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum GamlssModel {
    Linear(LinearGamlssModel),
    Splines(SplineGamlssModel),
}

fn check_row(x: &[f64]) -> Result<()> {
    if x.len() != N_PREDICTORS {
        return Err(Error::Shape(format!("expected {N_PREDICTORS} predictors, got {}", x.len())));
    }
    Ok(())
}

fn params_from(etas: [f64; 3]) -> ZeroAdjustedParams {
    ZeroAdjustedParams::from_linear_predictors(etas[0], etas[1], etas[2])
}

impl LinearGamlssModel {
    pub fn predict_params(&self, x: &[f64]) -> Result<ZeroAdjustedParams> {
        check_row(x)?;
        let z = self.standardizer.apply(x);
        let eta = |b: &[f64]| b[0] + b[1..].iter().zip(&z).map(|(b, v)| b * v).sum::<f64>();
        Ok(params_from([eta(&self.beta_mu), eta(&self.beta_sigma), eta(&self.beta_nu)]))
    }
}

impl SplineGamlssModel {
    /// Dense design row (intercept first) at a raw predictor row.
    pub fn design_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_row(x)?;
        let z = self.standardizer.apply(x);
        let mut row = vec![1.0];
        for (basis, v) in self.bases.iter().zip(&z) {
            row.extend(bspline_design(*v, basis));
        }
        Ok(row)
    }

    pub fn predict_params(&self, x: &[f64]) -> Result<ZeroAdjustedParams> {
        check_row(x)?;
        let z = self.standardizer.apply(x);
        let k = self.config.basis_size();
        let mut etas = [self.beta_mu[0], self.beta_sigma[0], self.beta_nu[0]];
        for (j, (basis, v)) in self.bases.iter().zip(&z).enumerate() {
            let (start, values) = basis.eval_nonzero(*v);
            let offset = 1 + j * k + start;
            for (e, beta) in etas.iter_mut().zip([&self.beta_mu, &self.beta_sigma, &self.beta_nu]) {
                *e += values.iter().zip(&beta[offset..]).map(|(b, c)| b * c).sum::<f64>();
            }
        }
        Ok(params_from(etas))
    }
}

impl GamlssModel {
    pub fn family(&self) -> Family {
        match self {
            Self::Linear(m) => m.family,
            Self::Splines(m) => m.family,
        }
    }

    pub fn mode(&self) -> GamlssMode {
        match self {
            Self::Linear(_) => GamlssMode::Linear,
            Self::Splines(_) => GamlssMode::Splines,
        }
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        match self {
            Self::Linear(m) => &m.diagnostics,
            Self::Splines(m) => &m.diagnostics,
        }
    }

    pub fn predict_params(&self, x: &[f64]) -> Result<ZeroAdjustedParams> {
        match self {
            Self::Linear(m) => m.predict_params(x),
            Self::Splines(m) => m.predict_params(x),
        }
    }
}

/// Moment-based starting values `(mu, sigma, nu)` from (weighted) targets.
pub fn initial_params(family: Family, y: &[f64], weights: Option<&[f64]>) -> ZeroAdjustedParams {
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (mut total, mut zeros, mut pos_w, mut s1) = (0.0, 0.0, 0.0, 0.0);
    for (i, &v) in y.iter().enumerate() {
        total += w(i);
        if v == 0.0 {
            zeros += w(i);
        } else {
            pos_w += w(i);
            s1 += w(i) * v;
        }
    }
    if pos_w <= 0.0 {
        return ZeroAdjustedParams::safeguarded(1.0, 1.0, 1.0);
    }
    let mu = s1 / pos_w;
    let var = y
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| w(i) * (v - mu).powi(2))
        .sum::<f64>()
        / pos_w;
    let sigma = match family {
        Family::Zaga => var.sqrt() / mu,
        Family::Zaig => (var / mu.powi(3)).sqrt(),
    };
    let sigma = if sigma > 0.0 && sigma.is_finite() { sigma } else { 1.0 };
    ZeroAdjustedParams::safeguarded(mu, sigma, zeros / total)
}

fn initial_coefs(family: Family, y: &[f64], weights: Option<&[f64]>, sizes: [usize; 3]) -> engine::Coefs {
    let p0 = initial_params(family, y, weights);
    let intercepts = [p0.mu().ln(), p0.sigma().ln(), link::logit(p0.nu())];
    std::array::from_fn(|b| {
        let mut c = vec![0.0; sizes[b]];
        c[0] = intercepts[b];
        c
    })
}

/// Weighted maximum likelihood for constant parameters.
pub fn fit_intercept_only(
    family: Family,
    y: &[f64],
    weights: Option<&[f64]>,
    controls: &FitControls,
) -> Result<(ZeroAdjustedParams, FitDiagnostics)> {
    if y.is_empty() {
        return Err(Error::Precondition("no observations".into()));
    }
    if let Some(w) = weights {
        if w.len() != y.len() || w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Precondition("weights must be finite, non-negative and one per observation".into()));
        }
    }
    let ones = || {
        let mut d = SparseDesign::new(1);
        for _ in y {
            d.push_row([(0, 1.0)]);
        }
        Block::unpenalized(d)
    };
    let problem = PenalizedProblem::new(family, y.to_vec(), weights.map(<[f64]>::to_vec), [ones(), ones(), ones()])?;
    let outcome = problem.fit(initial_coefs(family, y, weights, [1, 1, 1]), controls)?;
    let p = params_from([outcome.coefs[0][0], outcome.coefs[1][0], outcome.coefs[2][0]]);
    Ok((p, FitDiagnostics::from_outcome(&outcome)))
}

fn check_training(d: &Dataset, n_coefs: usize) -> Result<()> {
    if d.len() < n_coefs {
        return Err(Error::Precondition(format!(
            "{} observations cannot identify {n_coefs} coefficients",
            d.len()
        )));
    }
    if d.targets().iter().any(|&y| !(y >= 0.0 && y.is_finite())) {
        return Err(Error::Precondition("targets must be finite and non-negative".into()));
    }
    Ok(())
}

pub fn fit_gamlss(
    d: &Dataset,
    family: Family,
    mode: GamlssMode,
    spline: Option<&SplineConfig>,
    controls: &FitControls,
) -> Result<GamlssModel> {
    match mode {
        GamlssMode::Linear => fit_linear(d, family, controls).map(GamlssModel::Linear),
        GamlssMode::Splines => {
            let default = SplineConfig::default();
            fit_splines(d, family, spline.unwrap_or(&default), controls).map(GamlssModel::Splines)
        }
    }
}

fn fit_linear(d: &Dataset, family: Family, controls: &FitControls) -> Result<LinearGamlssModel> {
    let k = N_PREDICTORS + 1;
    check_training(d, k)?;
    let standardizer = Standardizer::fit(d);
    let mut design = SparseDesign::new(k);
    for x in d.rows() {
        let z = standardizer.apply(&x);
        design.push_row(std::iter::once((0, 1.0)).chain(z.into_iter().enumerate().map(|(j, v)| (j + 1, v))));
    }
    let block = || Block::unpenalized(design.clone());
    let y = d.targets().to_vec();
    let init = initial_coefs(family, &y, None, [k; 3]);
    let problem = PenalizedProblem::new(family, y, None, [block(), block(), block()])?;
    let outcome = problem.fit(init, controls)?;
    let [beta_mu, beta_sigma, beta_nu] = outcome.coefs.clone();
    Ok(LinearGamlssModel {
        family,
        beta_mu,
        beta_sigma,
        beta_nu,
        standardizer,
        diagnostics: FitDiagnostics::from_outcome(&outcome),
    })
}

fn fit_splines(d: &Dataset, family: Family, config: &SplineConfig, controls: &FitControls) -> Result<SplineGamlssModel> {
    config.validate()?;
    let k = config.basis_size();
    // free coefficients: intercept plus k - 1 per predictor
    let reduced = 1 + N_PREDICTORS * (k - 1);
    // with a positive penalty only its null space has to be identified by the data
    let identified = if config.lambda > 0.0 { 1 + N_PREDICTORS * config.penalty_order } else { reduced };
    check_training(d, identified)?;
    let standardizer = Standardizer::fit(d);
    let z_rows: Vec<Vec<f64>> = d.rows().map(|x| standardizer.apply(&x)).collect();

    let mut bases = Vec::with_capacity(N_PREDICTORS);
    for j in 0..N_PREDICTORS {
        let lo = z_rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
        let hi = z_rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
        bases.push(BSplineBasis::new(lo, hi, config.interior_knots, config.degree)?);
    }

    // reduced column of full index 1 + j*k + b (b >= 1) is 1 + j*(k-1) + b - 1
    let mut design = SparseDesign::new(reduced);
    for z in &z_rows {
        let mut entries = vec![(0, 1.0)];
        for (j, basis) in bases.iter().enumerate() {
            let (start, values) = basis.eval_nonzero(z[j]);
            for (o, v) in values.into_iter().enumerate() {
                let b = start + o;
                if b > 0 && v != 0.0 {
                    entries.push((1 + j * (k - 1) + b - 1, v));
                }
            }
        }
        design.push_row(entries);
    }

    let full_penalty = difference_penalty(k, config.penalty_order)?;
    let mut penalty = vec![0.0; reduced * reduced];
    for j in 0..N_PREDICTORS {
        let off = 1 + j * (k - 1);
        for a in 1..k {
            for b in 1..k {
                penalty[(off + a - 1) * reduced + off + b - 1] = full_penalty[a * k + b];
            }
        }
    }
    let block = || Block { design: design.clone(), penalty: Some(penalty.clone()), lambda: config.lambda };
    let y = d.targets().to_vec();
    let init = initial_coefs(family, &y, None, [reduced; 3]);
    let problem = PenalizedProblem::new(family, y, None, [block(), block(), block()])?;
    let outcome = problem.fit(init, controls)?;

    let expand = |c: &[f64]| {
        let mut full = vec![0.0; 1 + N_PREDICTORS * k];
        full[0] = c[0];
        for j in 0..N_PREDICTORS {
            for b in 1..k {
                full[1 + j * k + b] = c[1 + j * (k - 1) + b - 1];
            }
        }
        full
    };
    Ok(SplineGamlssModel {
        family,
        config: config.clone(),
        bases,
        beta_mu: expand(&outcome.coefs[0]),
        beta_sigma: expand(&outcome.coefs[1]),
        beta_nu: expand(&outcome.coefs[2]),
        standardizer,
        diagnostics: FitDiagnostics::from_outcome(&outcome),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{generate_synthetic, SyntheticSpec};

    fn zero_model(family: Family) -> LinearGamlssModel {
        LinearGamlssModel {
            family,
            beta_mu: vec![0.0; 10],
            beta_sigma: vec![0.0; 10],
            beta_nu: vec![0.0; 10],
            standardizer: Standardizer { mean: vec![0.0; 9], sd: vec![1.0; 9] },
            diagnostics: FitDiagnostics { converged: true, outer_iterations: 0, trace: vec![0.0] },
        }
    }

    #[test]
    fn zero_coefficients_give_unit_params() {
        let m = zero_model(Family::Zaga);
        let p = m.predict_params(&[3.0; 9]).unwrap();
        assert_eq!((p.mu(), p.sigma(), p.nu()), (1.0, 1.0, 0.5));
        let mut m = m;
        m.beta_nu[0] = link::logit(0.3);
        assert!((m.predict_params(&[0.0; 9]).unwrap().nu() - 0.3).abs() < 1e-15);
        assert!(matches!(m.predict_params(&[0.0; 8]), Err(Error::Shape(_))));
    }

    #[test]
    fn intercept_only_zaga_matches_closed_forms() {
        let truth = ZeroAdjustedParams::new(25.0, 0.8, 0.3).unwrap();
        let y = crate::dist::sample(Family::Zaga, &truth, 11, 4000).unwrap();
        let (p, diag) = fit_intercept_only(Family::Zaga, &y, None, &FitControls::default()).unwrap();
        let zf = y.iter().filter(|&&v| v == 0.0).count() as f64 / y.len() as f64;
        let pos: Vec<f64> = y.iter().copied().filter(|&v| v > 0.0).collect();
        let mean_pos = pos.iter().sum::<f64>() / pos.len() as f64;
        assert!((p.nu() - zf).abs() < 1e-3);
        assert!((p.mu() - mean_pos).abs() < 1e-3 * mean_pos);
        assert!(diag.converged);
        assert!(diag.trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn spline_prediction_matches_dense_design() {
        let data = generate_synthetic(&SyntheticSpec::default_for(Family::Zaga, 400, 3)).unwrap();
        let controls = FitControls { max_outer: 5, ..FitControls::default() };
        let model = fit_gamlss(&data.dataset, Family::Zaga, GamlssMode::Splines, None, &controls).unwrap();
        let GamlssModel::Splines(m) = &model else { panic!("expected spline model") };
        assert_eq!(m.beta_mu.len(), 1 + 9 * 24);
        for i in [0, 17, 399] {
            let x = data.dataset.row(i);
            let row = m.design_row(&x).unwrap();
            let etas: Vec<f64> = [&m.beta_mu, &m.beta_sigma, &m.beta_nu]
                .iter()
                .map(|b| row.iter().zip(b.iter()).map(|(r, c)| r * c).sum())
                .collect();
            let p = model.predict_params(&x).unwrap();
            assert!((p.mu().ln() - etas[0]).abs() < 1e-12);
            assert!((p.sigma().ln() - etas[1]).abs() < 1e-12);
            assert!((p.nu() - link::inv_logit(etas[2])).abs() < 1e-12);
        }
    }

    #[test]
    fn model_json_round_trip() {
        let m = GamlssModel::Linear(zero_model(Family::Zaig));
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"mode\":\"linear\""));
        assert_eq!(serde_json::from_str::<GamlssModel>(&text).unwrap(), m);
    }
}
