use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use zadr::ensemble::runner::{BaseFitReport, Stage};
use zadr::ensemble::{extract_quantiles, run_all_algorithms, AlgorithmKind, QuantileMatrix, RunOutput};
use zadr::features::{generate_synthetic, load_csv, split_three_way, write_csv, Dataset};
use zadr::metrics::{evaluate, EvaluationReport};
use zadr::model::{fit_base, BaseLearner, ModelDocument};
use zadr::rng::derive_seed;

use crate::config::{ExperimentConfig, InputSource};
use crate::error::CliError;
use crate::output::{self, AlgorithmStatus, RunManifest, RunStatus, StageTime};

pub const SOFTWARE: &str = "zadr";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn load_input(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    match &cfg.input {
        InputSource::Csv { path } => load_csv(path).map_err(|e| CliError::from(e).into_data()),
        InputSource::Synthetic(s) => Ok(generate_synthetic(&s.spec(cfg.seed))?.dataset),
    }
}

#[derive(Debug, Serialize)]
struct SampleCounts {
    total: usize,
    set1: usize,
    set2: usize,
    set3: usize,
    zero_fraction: f64,
}

#[derive(Debug, Serialize)]
struct CombinerSummary {
    tau: f64,
    intercept: f64,
    coefficients: Vec<f64>,
    train_loss: f64,
    base_train_loss: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct AlgorithmSummary {
    id: String,
    kind: AlgorithmKind,
    inputs: Vec<BaseLearner>,
    succeeded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    combiners: Option<Vec<CombinerSummary>>,
}

/// Base-fit diagnostics without wall times, which would break determinism.
#[derive(Debug, Serialize)]
struct BaseFitSummary {
    learner: BaseLearner,
    stage: Stage,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outer_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fallback_predictions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl From<&BaseFitReport> for BaseFitSummary {
    fn from(r: &BaseFitReport) -> Self {
        Self {
            learner: r.learner,
            stage: r.stage,
            converged: r.converged,
            outer_iterations: r.outer_iterations,
            objective: r.objective,
            fallback_predictions: r.fallback_predictions,
            error: r.error.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ExperimentReport<'a> {
    software: &'static str,
    version: &'static str,
    samples: SampleCounts,
    evaluation: &'a EvaluationReport,
    algorithms: Vec<AlgorithmSummary>,
    base_fits: Vec<BaseFitSummary>,
}

fn summarize(cfg: &ExperimentConfig, run: &RunOutput) -> Result<Vec<AlgorithmSummary>, CliError> {
    let specs = cfg.algorithm_specs()?;
    Ok(run
        .results
        .iter()
        .zip(&specs)
        .map(|(r, spec)| AlgorithmSummary {
            id: r.id.clone(),
            kind: r.kind,
            inputs: spec.inputs(),
            succeeded: r.succeeded(),
            error: r.error.clone(),
            combiners: r.stacked.as_ref().map(|s| {
                s.combiners
                    .iter()
                    .enumerate()
                    .map(|(j, c)| CombinerSummary {
                        tau: c.tau,
                        intercept: c.intercept,
                        coefficients: c.coefficients.clone(),
                        train_loss: s.train_loss[j],
                        base_train_loss: s.base_train_loss.iter().map(|b| b[j]).collect(),
                    })
                    .collect()
            }),
        })
        .collect())
}

/// Runs the three-set protocol and writes every result file into `cfg.out`.
/// Algorithm failures are recorded in the report and the manifest; the
/// caller decides the exit status from [`RunManifest::status`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest, CliError> {
    let mut stages = Vec::new();
    let mut stage = |name: &str, t: Instant| stages.push(StageTime { stage: name.into(), seconds: t.elapsed().as_secs_f64() });

    let t = Instant::now();
    let data = load_input(cfg)?;
    stage("load", t);

    let t = Instant::now();
    let split = split_three_way(&data, cfg.seed).map_err(|e| CliError::from(e).into_data())?;
    stage("split", t);

    let algorithms = cfg.algorithm_specs()?;
    let run = run_all_algorithms(&split, &algorithms, &cfg.settings());
    for (name, secs) in [
        ("holdout_fit", run.times.holdout_fit),
        ("combiner_fit", run.times.combiner_fit),
        ("final_fit", run.times.final_fit),
        ("assemble", run.times.assemble),
    ] {
        stages.push(StageTime { stage: name.into(), seconds: secs });
    }

    let t = Instant::now();
    let succeeded: Vec<(&str, &QuantileMatrix)> =
        run.results.iter().filter_map(|r| r.quantiles.as_ref().map(|q| (r.id.as_str(), q))).collect();
    let train = split.train_union();
    let evaluation = evaluate(&succeeded, split.set3.targets(), train.targets(), &cfg.tau_grid)?;
    stages.push(StageTime { stage: "evaluate".into(), seconds: t.elapsed().as_secs_f64() });

    let t = Instant::now();
    let config_json = cfg.to_json();
    let config_sha256 = output::sha256_hex(config_json.as_bytes());
    let report = ExperimentReport {
        software: SOFTWARE,
        version: VERSION,
        samples: SampleCounts {
            total: data.len(),
            set1: split.set1.len(),
            set2: split.set2.len(),
            set3: split.set3.len(),
            zero_fraction: data.zero_fraction(),
        },
        evaluation: &evaluation,
        algorithms: summarize(cfg, &run)?,
        base_fits: run.base_reports.iter().map(BaseFitSummary::from).collect(),
    };
    let report_json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))? + "\n";

    let dir = cfg.out.as_path();
    output::prepare_out_dir(dir)?;
    for (id, q) in &succeeded {
        output::write_file(dir, &output::quantile_file_name(id), &output::quantile_csv(&cfg.tau_grid, q))?;
    }
    output::write_evaluation(dir, &report_json, &evaluation)?;
    let files = output::inventory(dir)?;
    stages.push(StageTime { stage: "write".into(), seconds: t.elapsed().as_secs_f64() });

    let algorithms: Vec<AlgorithmStatus> = run
        .results
        .iter()
        .map(|r| AlgorithmStatus { id: r.id.clone(), succeeded: r.succeeded(), error: r.error.clone() })
        .collect();
    let status = if algorithms.iter().all(|a| a.succeeded) { RunStatus::Complete } else { RunStatus::Partial };
    let manifest = RunManifest {
        software: SOFTWARE.into(),
        version: VERSION.into(),
        status,
        config_sha256,
        config: cfg.clone(),
        stages,
        algorithms,
        files,
    };
    output::write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// Writes the configured synthetic dataset as CSV; returns the row count.
pub fn synth(cfg: &ExperimentConfig, out: &Path) -> Result<usize, CliError> {
    let InputSource::Synthetic(s) = &cfg.input else {
        return Err(CliError::Config("synth needs a synthetic input in the config".into()));
    };
    let data = generate_synthetic(&s.spec(cfg.seed))?;
    write_csv(&data.dataset, out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    Ok(data.dataset.len())
}

/// Fits one base learner on a CSV and writes the model document.
pub fn fit_model(cfg: &ExperimentConfig, learner: BaseLearner, data: &Path, out: &Path) -> Result<(), CliError> {
    let d = load_csv(data).map_err(|e| CliError::from(e).into_data())?;
    let seed = derive_seed(cfg.seed, &format!("fit/{}", learner.id()), 0);
    let model = fit_base(learner, &d, &cfg.learner_settings(), seed)
        .map_err(|e| CliError::Fit(format!("{learner}: {e}")))?;
    let text = ModelDocument::new(learner, model).to_json()?;
    std::fs::write(out, text).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

/// Predicts the configured quantile levels for every row of a CSV.
pub fn predict(cfg: &ExperimentConfig, model: &Path, data: &Path, out: &Path) -> Result<usize, CliError> {
    let text = std::fs::read_to_string(model).map_err(|e| CliError::Data(format!("{}: {e}", model.display())))?;
    let doc = ModelDocument::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", model.display())))?;
    let d = load_csv(data).map_err(|e| CliError::from(e).into_data())?;
    let q = extract_quantiles(&doc.model.predict_dataset(&d)?, &cfg.tau_grid)?;
    std::fs::write(out, output::quantile_csv(&cfg.tau_grid, &q))
        .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    Ok(q.n_rows())
}

/// Algorithm id of a quantile file: its stem without the `quantiles_` prefix.
pub fn id_from_path(p: &Path) -> String {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.strip_prefix("quantiles_").map(String::from).unwrap_or(stem)
}

/// Scores quantile files against the targets of `test`, with reference
/// quantiles from the targets of `train`; writes the report and summary tables.
pub fn evaluate_files(quantiles: &[PathBuf], test: &Path, train: &Path, out: &Path) -> Result<EvaluationReport, CliError> {
    if quantiles.is_empty() {
        return Err(CliError::Config("evaluate needs at least one quantile file".into()));
    }
    let test = load_csv(test).map_err(|e| CliError::from(e).into_data())?;
    let train = load_csv(train).map_err(|e| CliError::from(e).into_data())?;
    let mut grid = None;
    let mut mats = Vec::with_capacity(quantiles.len());
    for p in quantiles {
        let (g, q) = output::read_quantile_csv(p)?;
        match &grid {
            None => grid = Some(g),
            Some(first) if *first != g => {
                return Err(CliError::Data(format!("{}: levels differ from the first quantile file", p.display())));
            }
            Some(_) => {}
        }
        mats.push((id_from_path(p), q));
    }
    let grid = grid.expect("at least one file");
    let refs: Vec<(&str, &QuantileMatrix)> = mats.iter().map(|(id, q)| (id.as_str(), q)).collect();
    let report = evaluate(&refs, test.targets(), train.targets(), &grid).map_err(|e| CliError::from(e).into_data())?;
    std::fs::create_dir_all(out)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    output::write_evaluation(out, &json, &report)?;
    Ok(report)
}
