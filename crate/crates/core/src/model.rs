//! The six base learners behind one fitted-model type.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::{Family, PredictiveDistribution, ZeroAdjustedParams};
use crate::error::{Error, Result};
use crate::features::Dataset;
use crate::forest::{fit_forest, DistForest, ForestConfig};
use crate::gamlss::{fit_gamlss, FitControls, GamlssMode, GamlssModel, SplineConfig};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaseLearner {
    #[serde(rename = "GAMLSS-ZAIG")]
    GamlssZaig,
    #[serde(rename = "GAMLSS-ZAGA")]
    GamlssZaga,
    #[serde(rename = "GAMLSS-ZAIG-Splines")]
    GamlssZaigSplines,
    #[serde(rename = "GAMLSS-ZAGA-Splines")]
    GamlssZagaSplines,
    #[serde(rename = "DRF-ZAIG")]
    DrfZaig,
    #[serde(rename = "DRF-ZAGA")]
    DrfZaga,
}

impl BaseLearner {
    pub const ALL: [BaseLearner; 6] = [
        Self::GamlssZaig,
        Self::GamlssZaga,
        Self::GamlssZaigSplines,
        Self::GamlssZagaSplines,
        Self::DrfZaig,
        Self::DrfZaga,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::GamlssZaig => "GAMLSS-ZAIG",
            Self::GamlssZaga => "GAMLSS-ZAGA",
            Self::GamlssZaigSplines => "GAMLSS-ZAIG-Splines",
            Self::GamlssZagaSplines => "GAMLSS-ZAGA-Splines",
            Self::DrfZaig => "DRF-ZAIG",
            Self::DrfZaga => "DRF-ZAGA",
        }
    }

    pub fn family(self) -> Family {
        match self {
            Self::GamlssZaig | Self::GamlssZaigSplines | Self::DrfZaig => Family::Zaig,
            Self::GamlssZaga | Self::GamlssZagaSplines | Self::DrfZaga => Family::Zaga,
        }
    }
}

impl fmt::Display for BaseLearner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for BaseLearner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown base learner `{s}`")))
    }
}

/// Settings shared by every base-learner fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerSettings {
    pub forest: ForestConfig,
    pub spline: SplineConfig,
    pub controls: FitControls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FittedModel {
    Gamlss(GamlssModel),
    Forest(DistForest),
}

impl FittedModel {
    pub fn family(&self) -> Family {
        match self {
            Self::Gamlss(m) => m.family(),
            Self::Forest(f) => f.family,
        }
    }

    pub fn predict_params(&self, x: &[f64]) -> Result<ZeroAdjustedParams> {
        match self {
            Self::Gamlss(m) => m.predict_params(x),
            Self::Forest(f) => f.predict_params(x),
        }
    }

    /// Predictive distributions for every row of `d`.
    pub fn predict_dataset(&self, d: &Dataset) -> Result<Vec<PredictiveDistribution>> {
        let family = self.family();
        d.rows().map(|x| Ok(PredictiveDistribution::new(family, self.predict_params(&x)?))).collect()
    }
}

/// Fits one base learner. `seed` only affects forests.
pub fn fit_base(learner: BaseLearner, d: &Dataset, settings: &LearnerSettings, seed: u64) -> Result<FittedModel> {
    let family = learner.family();
    match learner {
        BaseLearner::GamlssZaig | BaseLearner::GamlssZaga => {
            fit_gamlss(d, family, GamlssMode::Linear, None, &settings.controls).map(FittedModel::Gamlss)
        }
        BaseLearner::GamlssZaigSplines | BaseLearner::GamlssZagaSplines => {
            fit_gamlss(d, family, GamlssMode::Splines, Some(&settings.spline), &settings.controls)
                .map(FittedModel::Gamlss)
        }
        BaseLearner::DrfZaig | BaseLearner::DrfZaga => {
            fit_forest(d, family, &settings.forest, seed).map(FittedModel::Forest)
        }
    }
}

/// Versioned on-disk form of a fitted base learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: u32,
    pub learner: BaseLearner,
    pub model: FittedModel,
}

impl ModelDocument {
    pub fn new(learner: BaseLearner, model: FittedModel) -> Self {
        Self { format_version: MODEL_FORMAT_VERSION, learner, model }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Data(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        if doc.model.family() != doc.learner.family() {
            return Err(Error::Data(format!("model family does not match learner {}", doc.learner)));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{generate_synthetic, SyntheticSpec};

    #[test]
    fn ids_round_trip() {
        for b in BaseLearner::ALL {
            assert_eq!(b.id().parse::<BaseLearner>().unwrap(), b);
            assert_eq!(serde_json::to_string(&b).unwrap(), format!("\"{}\"", b.id()));
        }
        assert!("DRF".parse::<BaseLearner>().is_err());
    }

    #[test]
    fn document_round_trip_preserves_predictions() {
        let data = generate_synthetic(&SyntheticSpec::default_for(Family::Zaga, 300, 2)).unwrap();
        let mut settings = LearnerSettings::default();
        settings.forest.n_trees = 3;
        for learner in [BaseLearner::GamlssZaga, BaseLearner::DrfZaig] {
            let m = fit_base(learner, &data.dataset, &settings, 5).unwrap();
            let doc = ModelDocument::new(learner, m);
            let back = ModelDocument::from_json(&doc.to_json().unwrap()).unwrap();
            assert_eq!(back, doc);
            let x = data.dataset.row(7);
            assert_eq!(back.model.predict_params(&x).unwrap(), doc.model.predict_params(&x).unwrap());
        }
    }

    #[test]
    fn rejects_future_versions() {
        let text = r#"{"format_version":2,"learner":"DRF-ZAGA","model":{}}"#;
        assert!(ModelDocument::from_json(text).is_err());
    }
}
