use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zadr::ensemble::roster::select;
use zadr::ensemble::{roster, AlgorithmSpec, ExperimentSettings, TauGrid};
use zadr::features::SyntheticSpec;
use zadr::forest::ForestConfig;
use zadr::gamlss::{FitControls, SplineConfig};
use zadr::model::LearnerSettings;
use zadr::rng::derive_seed;
use zadr::Family;

use crate::error::CliError;

pub const DEFAULT_SYNTHETIC_N: usize = 6000;
pub const QUICK_N: usize = 600;
pub const QUICK_TREES: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum InputSource {
    Csv { path: PathBuf },
    Synthetic(SyntheticInput),
}

impl Default for InputSource {
    fn default() -> Self {
        InputSource::Synthetic(SyntheticInput::default())
    }
}

/// Synthetic data settings. Missing coefficient vectors take the family's
/// defaults when the config is parsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticInput {
    pub n: usize,
    pub family: Family,
    pub beta_mu: Option<Vec<f64>>,
    pub beta_sigma: Option<Vec<f64>>,
    pub beta_nu: Option<Vec<f64>>,
}

impl Default for SyntheticInput {
    fn default() -> Self {
        Self { n: DEFAULT_SYNTHETIC_N, family: Family::Zaga, beta_mu: None, beta_sigma: None, beta_nu: None }
    }
}

impl SyntheticInput {
    fn fill_defaults(&mut self) {
        let d = SyntheticSpec::default_for(self.family, self.n, 0);
        self.beta_mu.get_or_insert(d.beta_mu);
        self.beta_sigma.get_or_insert(d.beta_sigma);
        self.beta_nu.get_or_insert(d.beta_nu);
    }

    /// The generator spec; its seed is a named substream of the master seed.
    pub fn spec(&self, master_seed: u64) -> SyntheticSpec {
        let mut s = self.clone();
        s.fill_defaults();
        SyntheticSpec {
            n: s.n,
            family: s.family,
            beta_mu: s.beta_mu.unwrap_or_default(),
            beta_sigma: s.beta_sigma.unwrap_or_default(),
            beta_nu: s.beta_nu.unwrap_or_default(),
            seed: derive_seed(master_seed, "generator", 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub input: InputSource,
    pub seed: u64,
    pub tau_grid: TauGrid,
    pub forest: ForestConfig,
    pub spline: SplineConfig,
    pub controls: FitControls,
    pub algorithms: Vec<String>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            input: InputSource::default(),
            seed: 1,
            tau_grid: TauGrid::default(),
            forest: ForestConfig::default(),
            spline: SplineConfig::default(),
            controls: FitControls::default(),
            algorithms: roster().into_iter().map(|a| a.id).collect(),
            out: PathBuf::from("results"),
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub algorithms: Option<Vec<String>>,
    pub quick: bool,
}

impl ExperimentConfig {
    /// Checks every setting and fills the synthetic coefficient defaults.
    pub fn validate(mut self) -> Result<Self, CliError> {
        self.forest.validate()?;
        self.spline.validate()?;
        if self.controls.max_outer == 0 || !(self.controls.tol > 0.0 && self.controls.tol.is_finite()) {
            return Err(CliError::Config("controls: max_outer must be positive and tol finite and positive".into()));
        }
        if self.algorithms.is_empty() {
            return Err(CliError::Config("algorithms: at least one algorithm is required".into()));
        }
        select(&self.algorithms)?;
        if let InputSource::Synthetic(s) = &mut self.input {
            s.fill_defaults();
            s.spec(self.seed).validate()?;
        }
        Ok(self)
    }

    pub fn apply(mut self, o: &Overrides) -> Result<Self, CliError> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(a) = &o.algorithms {
            self.algorithms = a.clone();
        }
        if o.quick {
            self.forest.n_trees = QUICK_TREES;
            if let InputSource::Synthetic(s) = &mut self.input {
                s.n = QUICK_N;
            }
        }
        self.validate()
    }

    pub fn algorithm_specs(&self) -> Result<Vec<AlgorithmSpec>, CliError> {
        Ok(select(&self.algorithms)?)
    }

    pub fn learner_settings(&self) -> LearnerSettings {
        LearnerSettings { forest: self.forest.clone(), spline: self.spline.clone(), controls: self.controls.clone() }
    }

    pub fn settings(&self) -> ExperimentSettings {
        ExperimentSettings { learners: self.learner_settings(), grid: self.tau_grid.clone(), seed: self.seed }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a JSON config; errors carry the offending field path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Config(inner.to_string())
        } else {
            CliError::Config(format!("{path}: {inner}"))
        }
    })?;
    cfg.validate()
}

pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            parse_config(&text)?
        }
        None => ExperimentConfig::default().validate()?,
    };
    cfg.apply(overrides)
}

/// Splits a `--algorithms` value on commas.
pub fn parse_algorithm_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
}
