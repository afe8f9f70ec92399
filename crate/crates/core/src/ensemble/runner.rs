//! The three-set protocol: bases on set 1 feed the combiners on set 2, then
//! every base is refitted on sets 1 and 2 and all algorithms predict set 3.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::roster::{AlgorithmKind, AlgorithmSpec};
use super::stack::{fit_combiners, stack_apply, StackedModel};
use super::{combine_simple, extract_quantiles, CombineKind, QuantileMatrix, TauGrid};
use crate::dist::PredictiveDistribution;
use crate::error::Result;
use crate::features::{Dataset, ThreeWaySplit};
use crate::model::{fit_base, BaseLearner, FittedModel, LearnerSettings};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub learners: LearnerSettings,
    pub grid: TauGrid,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Fitted on set 1, predicting set 2.
    Holdout,
    /// Fitted on sets 1 and 2, predicting set 3.
    Final,
}

/// Diagnostics of one base-learner fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseFitReport {
    pub learner: BaseLearner,
    pub stage: Stage,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    /// Forest predictions that fell back from the weighted MLE.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_predictions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmResult {
    pub id: String,
    pub kind: AlgorithmKind,
    /// Set-3 quantiles; `None` when the algorithm failed.
    #[serde(skip)]
    pub quantiles: Option<QuantileMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stacked: Option<StackedModel>,
}

impl AlgorithmResult {
    pub fn succeeded(&self) -> bool {
        self.quantiles.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub holdout_fit: f64,
    pub combiner_fit: f64,
    pub final_fit: f64,
    pub assemble: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub results: Vec<AlgorithmResult>,
    pub base_reports: Vec<BaseFitReport>,
    pub times: StageTimes,
}

impl RunOutput {
    pub fn get(&self, id: &str) -> Option<&AlgorithmResult> {
        self.results.iter().find(|r| r.id == id)
    }
}

type StageOutput = BTreeMap<BaseLearner, std::result::Result<QuantileMatrix, String>>;

fn predict_with_fallbacks(model: &FittedModel, x: &Dataset) -> Result<(Vec<PredictiveDistribution>, Option<usize>)> {
    match model {
        FittedModel::Forest(f) => {
            let mut fallbacks = 0;
            let preds = x
                .rows()
                .map(|r| {
                    let p = f.predict(&r)?;
                    fallbacks += usize::from(p.fallback);
                    Ok(PredictiveDistribution::new(f.family, p.params))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((preds, Some(fallbacks)))
        }
        FittedModel::Gamlss(_) => Ok((model.predict_dataset(x)?, None)),
    }
}

fn run_stage(
    learners: &[BaseLearner],
    train: &Dataset,
    test: &Dataset,
    stage: Stage,
    settings: &ExperimentSettings,
) -> (StageOutput, Vec<BaseFitReport>) {
    let label = match stage {
        Stage::Holdout => "holdout",
        Stage::Final => "final",
    };
    let outcomes: Vec<(BaseLearner, std::result::Result<QuantileMatrix, String>, BaseFitReport)> = learners
        .par_iter()
        .map(|&b| {
            let start = Instant::now();
            let seed = derive_seed(settings.seed, &format!("{label}/{}", b.id()), 0);
            let mut report = BaseFitReport {
                learner: b,
                stage,
                seconds: 0.0,
                converged: None,
                outer_iterations: None,
                objective: None,
                fallback_predictions: None,
                error: None,
            };
            let outcome = fit_base(b, train, &settings.learners, seed).and_then(|model| {
                if let FittedModel::Gamlss(g) = &model {
                    let d = g.diagnostics();
                    report.converged = Some(d.converged);
                    report.outer_iterations = Some(d.outer_iterations);
                    report.objective = Some(d.objective());
                }
                let (preds, fallbacks) = predict_with_fallbacks(&model, test)?;
                report.fallback_predictions = fallbacks;
                extract_quantiles(&preds, &settings.grid)
            });
            report.seconds = start.elapsed().as_secs_f64();
            let outcome = outcome.map_err(|e| format!("{b} ({label} fit): {e}"));
            report.error = outcome.as_ref().err().cloned();
            (b, outcome, report)
        })
        .collect();
    let mut out = BTreeMap::new();
    let mut reports = Vec::new();
    for (b, o, r) in outcomes {
        out.insert(b, o);
        reports.push(r);
    }
    (out, reports)
}

fn gather<'a>(stage: &'a StageOutput, bases: &[BaseLearner]) -> std::result::Result<Vec<&'a QuantileMatrix>, String> {
    bases.iter().map(|b| stage[b].as_ref().map_err(Clone::clone)).collect()
}

fn unique(bases: impl IntoIterator<Item = BaseLearner>) -> Vec<BaseLearner> {
    let mut v: Vec<BaseLearner> = bases.into_iter().collect();
    v.sort();
    v.dedup();
    v
}

/// Runs `algorithms` on `split`. Failures are recorded per algorithm, so one
/// failing base only removes the algorithms that depend on it.
pub fn run_all_algorithms(split: &ThreeWaySplit, algorithms: &[AlgorithmSpec], settings: &ExperimentSettings) -> RunOutput {
    let mut times = StageTimes::default();

    let stacked_bases = unique(
        algorithms.iter().filter(|a| a.kind == AlgorithmKind::Stacking).flat_map(|a| a.bases.iter().copied()),
    );
    let t = Instant::now();
    let (holdout, mut base_reports) = run_stage(&stacked_bases, &split.set1, &split.set2, Stage::Holdout, settings);
    times.holdout_fit = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let stacks: Vec<Option<std::result::Result<StackedModel, String>>> = algorithms
        .par_iter()
        .map(|a| {
            (a.kind == AlgorithmKind::Stacking).then(|| {
                let mats = gather(&holdout, &a.bases)?;
                fit_combiners(&a.bases, &mats, split.set2.targets(), &settings.grid)
                    .map_err(|e| format!("combiner fit: {e}"))
            })
        })
        .collect();
    times.combiner_fit = t.elapsed().as_secs_f64();

    let final_bases = unique(algorithms.iter().flat_map(|a| a.inputs()));
    let t = Instant::now();
    let (finals, reports) = run_stage(&final_bases, &split.train_union(), &split.set3, Stage::Final, settings);
    base_reports.extend(reports);
    times.final_fit = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let results = algorithms
        .iter()
        .zip(stacks)
        .map(|(a, stack)| {
            let mut stacked = None;
            let outcome: std::result::Result<QuantileMatrix, String> = (|| {
                let inputs = gather(&finals, &a.inputs())?;
                match a.kind {
                    AlgorithmKind::Individual => Ok(inputs[0].clone()),
                    AlgorithmKind::Mean => combine_simple(CombineKind::Mean, &inputs).map_err(|e| e.to_string()),
                    AlgorithmKind::Median => combine_simple(CombineKind::Median, &inputs).map_err(|e| e.to_string()),
                    AlgorithmKind::Stacking => {
                        let model = stack.expect("stacking entries carry a combiner")?;
                        let q = stack_apply(&model, &inputs).map_err(|e| e.to_string());
                        stacked = Some(model);
                        q
                    }
                }
            })();
            let (quantiles, error) = match outcome {
                Ok(q) => (Some(q), None),
                Err(e) => (None, Some(e)),
            };
            AlgorithmResult { id: a.id.clone(), kind: a.kind, quantiles, error, stacked }
        })
        .collect();
    times.assemble = t.elapsed().as_secs_f64();

    RunOutput { results, base_reports, times }
}
