//! Zero-adjusted inverse Gaussian (ZAIG) and zero-adjusted gamma (ZAGA)
//! distributions.
//!
//! Both put a point mass `nu` at zero and a continuous density on `(0, ∞)`
//! scaled by `1 - nu`. The continuous parts are parameterized by their mean
//! `mu` and a dispersion `sigma`:
//!
//! - ZAIG: inverse Gaussian with mean `mu` and shape `1 / sigma²`,
//! - ZAGA: gamma with shape `1 / sigma²` and scale `sigma² mu`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, InverseGaussian};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special;

pub const NU_MIN: f64 = 1e-6;
pub const NU_MAX: f64 = 1.0 - 1e-6;
pub const MU_MIN: f64 = 1e-8;
pub const MU_MAX: f64 = 1e12;
pub const SIGMA_MIN: f64 = 1e-8;
pub const SIGMA_MAX: f64 = 1e6;

/// `ln(1e-300)`: floor applied to every log-density entering a likelihood.
pub const LOG_DENSITY_FLOOR: f64 = -690.775_527_898_213_7;

/// Absolute tolerance on the continuous-part probability when inverting the CDF.
const QUANTILE_PROB_TOL: f64 = 1e-10;
const QUANTILE_MAX_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "ZAIG")]
    Zaig,
    #[serde(rename = "ZAGA")]
    Zaga,
}

impl Family {
    pub const ALL: [Family; 2] = [Family::Zaig, Family::Zaga];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Zaig => "ZAIG",
            Family::Zaga => "ZAGA",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ZAIG" => Ok(Family::Zaig),
            "ZAGA" => Ok(Family::Zaga),
            other => Err(Error::Config(format!("unknown family `{other}` (expected ZAIG or ZAGA)"))),
        }
    }
}

/// The `(mu, sigma, nu)` triple of a zero-adjusted distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ZeroAdjustedParams {
    mu: f64,
    sigma: f64,
    nu: f64,
}

#[derive(Deserialize)]
struct RawParams {
    mu: f64,
    sigma: f64,
    nu: f64,
}

impl TryFrom<RawParams> for ZeroAdjustedParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ZeroAdjustedParams::new(raw.mu, raw.sigma, raw.nu)
    }
}

impl ZeroAdjustedParams {
    /// Strict constructor: rejects anything outside `mu > 0, sigma > 0, 0 < nu < 1`.
    pub fn new(mu: f64, sigma: f64, nu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::Parameter(format!("mu must be positive and finite, got {mu}")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Parameter(format!("sigma must be positive and finite, got {sigma}")));
        }
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::Parameter(format!("nu must lie in (0, 1), got {nu}")));
        }
        Ok(Self { mu, sigma, nu })
    }

    /// Clamps each parameter into its numerically safe range. NaN maps to the
    /// lower bound.
    pub fn safeguarded(mu: f64, sigma: f64, nu: f64) -> Self {
        Self {
            mu: mu.max(MU_MIN).min(MU_MAX),
            sigma: sigma.max(SIGMA_MIN).min(SIGMA_MAX),
            nu: nu.max(NU_MIN).min(NU_MAX),
        }
    }

    /// Builds parameters from linear predictors on the (log, log, logit) scale.
    pub fn from_linear_predictors(eta_mu: f64, eta_sigma: f64, eta_nu: f64) -> Self {
        Self::safeguarded(link::exp(eta_mu), link::exp(eta_sigma), link::inv_logit(eta_nu))
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Shape of the continuous part, `1 / sigma²`.
    pub fn shape(&self) -> f64 {
        1.0 / (self.sigma * self.sigma)
    }
}

/// Link functions shared by every fitter: log for `mu` and `sigma`, logit for `nu`.
pub mod link {
    const MAX_ETA: f64 = 700.0;

    pub fn log(x: f64) -> f64 {
        x.ln()
    }

    pub fn exp(eta: f64) -> f64 {
        eta.min(MAX_ETA).exp()
    }

    pub fn logit(p: f64) -> f64 {
        (p / (1.0 - p)).ln()
    }

    pub fn inv_logit(eta: f64) -> f64 {
        if eta >= 0.0 {
            1.0 / (1.0 + (-eta).exp())
        } else {
            let e = eta.exp();
            e / (1.0 + e)
        }
    }
}

/// A family together with one parameter triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub family: Family,
    pub params: ZeroAdjustedParams,
}

impl PredictiveDistribution {
    pub fn new(family: Family, params: ZeroAdjustedParams) -> Self {
        Self { family, params }
    }

    pub fn density(&self, y: f64) -> Result<f64> {
        density(self.family, y, &self.params)
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        cdf(self.family, y, &self.params)
    }

    pub fn quantile(&self, tau: f64) -> Result<f64> {
        quantile(self.family, tau, &self.params)
    }
}

fn check_y(y: f64) -> Result<()> {
    if y.is_nan() || y < 0.0 {
        return Err(Error::Domain(format!("observation must be non-negative, got {y}")));
    }
    Ok(())
}

fn check_params(p: &ZeroAdjustedParams) -> Result<()> {
    ZeroAdjustedParams::new(p.mu, p.sigma, p.nu).map(|_| ())
}

/// `1 + ln r - r`, accurate near `r = 1`.
fn one_plus_ln_minus(r: f64) -> f64 {
    let d = r - 1.0;
    if d.abs() < 0.5 {
        d.ln_1p() - d
    } else {
        1.0 + r.ln() - r
    }
}

/// Log-density of the continuous part at `y > 0`, without the `1 - nu` factor.
pub(crate) fn ln_continuous_density(family: Family, y: f64, p: &ZeroAdjustedParams) -> f64 {
    let (mu, sigma) = (p.mu, p.sigma);
    match family {
        Family::Zaig => {
            let s2 = sigma * sigma;
            let d = y - mu;
            -0.5 * (2.0 * std::f64::consts::PI * s2 * y * y * y).ln() - d * d / (2.0 * mu * mu * s2 * y)
        }
        Family::Zaga => {
            let a = 1.0 / (sigma * sigma);
            special::gamma_shape_term(a) + a * one_plus_ln_minus(y / mu) - y.ln()
        }
    }
}

/// Log of the mixed density: `ln nu` at zero, `ln(1 - nu) + ln f_cont(y)` above.
pub(crate) fn ln_density_unchecked(family: Family, y: f64, p: &ZeroAdjustedParams) -> f64 {
    if y == 0.0 {
        p.nu.ln()
    } else {
        (-p.nu).ln_1p() + ln_continuous_density(family, y, p)
    }
}

/// Continuous-part CDF.
pub(crate) fn continuous_cdf(family: Family, y: f64, p: &ZeroAdjustedParams) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    match family {
        Family::Zaig => {
            let lambda = 1.0 / (p.sigma * p.sigma);
            let root = (lambda / y).sqrt();
            let r = y / p.mu;
            let first = special::std_normal_cdf(root * (r - 1.0));
            // e^{2λ/μ} Φ(−z) in log space; the exponential alone overflows for small sigma
            let second = (2.0 * lambda / p.mu + special::ln_std_normal_cdf(-root * (r + 1.0))).exp();
            (first + second).min(1.0)
        }
        Family::Zaga => {
            let a = 1.0 / (p.sigma * p.sigma);
            special::reg_lower_gamma(a, a * y / p.mu)
        }
    }
}

/// Probability mass (`y = 0`) or density (`y > 0`).
pub fn density(family: Family, y: f64, p: &ZeroAdjustedParams) -> Result<f64> {
    check_y(y)?;
    check_params(p)?;
    if y == 0.0 {
        return Ok(p.nu);
    }
    Ok((1.0 - p.nu) * ln_continuous_density(family, y, p).exp())
}

/// Mixed CDF `nu + (1 - nu) F_cont(y)`.
pub fn cdf(family: Family, y: f64, p: &ZeroAdjustedParams) -> Result<f64> {
    check_y(y)?;
    check_params(p)?;
    Ok(p.nu + (1.0 - p.nu) * continuous_cdf(family, y, p))
}

/// Left-continuous inverse of the mixed CDF. Levels at or below `nu` map to zero.
pub fn quantile(family: Family, tau: f64, p: &ZeroAdjustedParams) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {tau}")));
    }
    check_params(p)?;
    if tau <= p.nu {
        return Ok(0.0);
    }
    let target = (tau - p.nu) / (1.0 - p.nu);
    continuous_quantile(family, target, p)
}

fn continuous_quantile(family: Family, target: f64, p: &ZeroAdjustedParams) -> Result<f64> {
    let f = |y: f64| continuous_cdf(family, y, p) - target;

    let mut lo = 0.0_f64;
    let mut hi = p.mu;
    let mut f_hi = f(hi);
    let mut expansions = 0;
    while f_hi < 0.0 {
        lo = hi;
        hi *= 2.0;
        f_hi = f(hi);
        expansions += 1;
        if expansions > 2_000 || !hi.is_finite() {
            return Err(Error::Numeric(format!("could not bracket {family} quantile at p={target}")));
        }
    }
    if f_hi.abs() <= QUANTILE_PROB_TOL {
        return Ok(hi);
    }

    let mut y = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
    for _ in 0..QUANTILE_MAX_STEPS {
        let fy = f(y);
        if fy.abs() <= QUANTILE_PROB_TOL {
            return Ok(y);
        }
        if fy < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(y);
        }
        let dens = ln_continuous_density(family, y, p).exp();
        let newton = y - fy / dens;
        y = if dens > 0.0 && newton > lo && newton < hi {
            newton
        } else if lo == 0.0 {
            // no lower bracket yet: shrink by decades, down to underflow
            if hi < f64::MIN_POSITIVE {
                return Ok(0.0);
            }
            hi * 1e-3
        } else if lo > 0.0 && hi / lo > 4.0 {
            // geometric bisection resolves long tails and spikes near zero
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Numeric(format!(
        "{family} quantile did not converge within {QUANTILE_MAX_STEPS} steps (p={target})"
    )))
}

/// One draw from the mixed distribution using the caller's generator.
pub fn draw<R: Rng + ?Sized>(family: Family, p: &ZeroAdjustedParams, rng: &mut R) -> Result<f64> {
    if rng.random::<f64>() < p.nu {
        return Ok(0.0);
    }
    let y = match family {
        Family::Zaig => InverseGaussian::new(p.mu, p.shape())
            .map_err(|e| Error::Parameter(format!("inverse Gaussian: {e}")))?
            .sample(rng),
        Family::Zaga => {
            let a = p.shape();
            Gamma::new(a, p.mu / a)
                .map_err(|e| Error::Parameter(format!("gamma: {e}")))?
                .sample(rng)
        }
    };
    // a continuous draw can underflow to exactly zero for extreme shapes
    Ok(if y > 0.0 { y } else { f64::MIN_POSITIVE })
}

/// `n` seeded draws; identical `(seed, n)` give identical output.
pub fn sample(family: Family, p: &ZeroAdjustedParams, seed: u64, n: usize) -> Result<Vec<f64>> {
    check_params(p)?;
    if n == 0 {
        return Err(Error::Size("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| draw(family, p, &mut rng)).collect()
}

/// Log-density with validation and the likelihood floor applied.
pub fn log_density(family: Family, y: f64, p: &ZeroAdjustedParams) -> Result<f64> {
    check_y(y)?;
    check_params(p)?;
    Ok(ln_density_unchecked(family, y, p).max(LOG_DENSITY_FLOOR))
}

/// Sum of floored log-densities over paired observations and parameters.
pub fn log_likelihood(family: Family, y: &[f64], params: &[ZeroAdjustedParams]) -> Result<f64> {
    if y.len() != params.len() {
        return Err(Error::Shape(format!(
            "{} observations but {} parameter triples",
            y.len(),
            params.len()
        )));
    }
    y.iter().zip(params).map(|(&yi, p)| log_density(family, yi, p)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(mu: f64, sigma: f64, nu: f64) -> ZeroAdjustedParams {
        ZeroAdjustedParams::new(mu, sigma, nu).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ZeroAdjustedParams::new(0.0, 1.0, 0.5).is_err());
        assert!(ZeroAdjustedParams::new(1.0, -1.0, 0.5).is_err());
        assert!(ZeroAdjustedParams::new(1.0, 1.0, 1.0).is_err());
        assert!(ZeroAdjustedParams::new(1.0, 1.0, 0.0).is_err());
        assert!(ZeroAdjustedParams::new(f64::NAN, 1.0, 0.5).is_err());
        let s = ZeroAdjustedParams::safeguarded(0.0, 1e9, 1.0);
        assert_eq!((s.mu(), s.sigma(), s.nu()), (MU_MIN, SIGMA_MAX, NU_MAX));
    }

    #[test]
    fn deserialization_enforces_invariants() {
        let ok: ZeroAdjustedParams = serde_json::from_str(r#"{"mu":2,"sigma":1,"nu":0.3}"#).unwrap();
        assert_eq!(ok, p(2.0, 1.0, 0.3));
        assert!(serde_json::from_str::<ZeroAdjustedParams>(r#"{"mu":2,"sigma":1,"nu":1.5}"#).is_err());
    }

    #[test]
    fn family_round_trips() {
        for fam in Family::ALL {
            let s = serde_json::to_string(&fam).unwrap();
            assert_eq!(serde_json::from_str::<Family>(&s).unwrap(), fam);
            assert_eq!(fam.as_str().parse::<Family>().unwrap(), fam);
        }
        assert!("ZAXX".parse::<Family>().is_err());
    }

    #[test]
    fn density_examples() {
        assert_eq!(density(Family::Zaig, 0.0, &p(1.0, 1.0, 0.3)).unwrap(), 0.3);
        let d = density(Family::Zaig, 1.0, &p(1.0, 1.0, 1e-6)).unwrap();
        let expected = (1.0 - 1e-6) / (2.0 * std::f64::consts::PI).sqrt();
        assert!((d - expected).abs() < 1e-14);
        let d = density(Family::Zaga, 2.0, &p(2.0, 1.0, 0.2)).unwrap();
        assert!((d - 0.8 * (-1.0_f64).exp() / 2.0).abs() < 1e-14);
        assert!((d - 0.147_151_776_468_576_9).abs() < 1e-12);
    }

    #[test]
    fn density_errors() {
        assert!(matches!(density(Family::Zaga, -1.0, &p(1.0, 1.0, 0.5)), Err(Error::Domain(_))));
        let bad = ZeroAdjustedParams { mu: -1.0, sigma: 1.0, nu: 0.5 };
        assert!(matches!(density(Family::Zaga, 1.0, &bad), Err(Error::Parameter(_))));
    }

    #[test]
    fn cdf_examples() {
        for fam in Family::ALL {
            assert_eq!(cdf(fam, 0.0, &p(3.0, 0.7, 0.3)).unwrap(), 0.3);
        }
        // exponential median with nu at its floor
        let c = continuous_cdf(Family::Zaga, 2.0 * 2f64.ln(), &p(2.0, 1.0, 0.5));
        assert!((c - 0.5).abs() < 1e-13);
    }

    #[test]
    fn quantile_examples() {
        for fam in Family::ALL {
            assert_eq!(quantile(fam, 0.2, &p(2.0, 1.0, 0.3)).unwrap(), 0.0);
            assert_eq!(quantile(fam, 0.3, &p(2.0, 1.0, 0.3)).unwrap(), 0.0);
        }
        let q = quantile(Family::Zaga, 0.65, &p(2.0, 1.0, 0.3)).unwrap();
        assert!((q - 2.0 * 2f64.ln()).abs() < 1e-9);
        assert!(matches!(quantile(Family::Zaga, 1.0, &p(2.0, 1.0, 0.3)), Err(Error::Domain(_))));
        assert!(matches!(quantile(Family::Zaga, 0.0, &p(2.0, 1.0, 0.3)), Err(Error::Domain(_))));
    }

    #[test]
    fn tiny_gamma_quantiles_resolve_or_underflow_to_zero() {
        for sigma in [8.0, 20.0, 1e3] {
            let params = p(30.0, sigma, 0.01);
            for tau in [0.0125, 0.05, 0.5] {
                let q = quantile(Family::Zaga, tau, &params).unwrap();
                assert!(q >= 0.0);
                if q > 1e-280 {
                    let c = cdf(Family::Zaga, q, &params).unwrap();
                    assert!((c - tau).abs() < 1e-6, "sigma={sigma} tau={tau}: q={q} cdf={c}");
                }
            }
        }
    }

    #[test]
    fn quantile_handles_extreme_dispersion() {
        for fam in Family::ALL {
            for &(mu, sigma) in &[(1.0, 1e-4), (50.0, 5.0), (1e-3, 0.3), (1e6, 2.0)] {
                let params = p(mu, sigma, 0.05);
                for tau in [0.06, 0.5, 0.9875] {
                    let q = quantile(fam, tau, &params).unwrap();
                    let c = cdf(fam, q, &params).unwrap();
                    assert!((c - tau).abs() < 1e-6, "{fam} mu={mu} sigma={sigma} tau={tau}: {c}");
                }
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_zero_heavy() {
        let a = sample(Family::Zaig, &p(1.0, 1.0, 0.999_999), 7, 1000).unwrap();
        assert!(a.iter().filter(|&&y| y == 0.0).count() >= 990);
        let b = sample(Family::Zaig, &p(1.0, 1.0, 0.999_999), 7, 1000).unwrap();
        assert_eq!(a, b);
        let c = sample(Family::Zaga, &p(3.0, 0.5, 0.5), 11, 100_000).unwrap();
        let zeros = c.iter().filter(|&&y| y == 0.0).count() as f64 / 1e5;
        assert!((zeros - 0.5).abs() < 0.01);
        assert!(c.iter().all(|&y| y >= 0.0));
        assert!(sample(Family::Zaga, &p(3.0, 0.5, 0.5), 11, 0).is_err());
    }

    #[test]
    fn log_likelihood_examples() {
        let single = log_likelihood(Family::Zaig, &[0.0], &[p(1.0, 1.0, 0.3)]).unwrap();
        assert!((single - 0.3f64.ln()).abs() < 1e-15);
        let pr = p(1.5, 0.8, 0.2);
        let one = log_likelihood(Family::Zaga, &[1.3], &[pr]).unwrap();
        let two = log_likelihood(Family::Zaga, &[1.3, 1.3], &[pr, pr]).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-14);
        assert!(matches!(log_likelihood(Family::Zaga, &[1.0, 2.0], &[pr]), Err(Error::Shape(_))));
    }

    #[test]
    fn log_likelihood_floors_impossible_points() {
        // far tail of a very tight inverse Gaussian
        let ll = log_likelihood(Family::Zaig, &[1e6], &[p(1.0, 1e-3, 0.1)]).unwrap();
        assert_eq!(ll, LOG_DENSITY_FLOOR);
    }

    #[test]
    fn links_invert() {
        for x in [1e-6, 0.3, 0.5, 0.9] {
            assert!((link::inv_logit(link::logit(x)) - x).abs() < 1e-15);
        }
        assert_eq!(link::inv_logit(0.0), 0.5);
        assert!((link::exp(link::log(7.5)) - 7.5).abs() < 1e-14);
        let p0 = ZeroAdjustedParams::from_linear_predictors(0.0, 0.0, 0.0);
        assert_eq!((p0.mu(), p0.sigma(), p0.nu()), (1.0, 1.0, 0.5));
    }
}
