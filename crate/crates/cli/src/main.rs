use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zadr::model::BaseLearner;
use zadr_cli::config::{load_config, parse_algorithm_list, Overrides};
use zadr_cli::{run, CliError, RunStatus};

/// Zero-adjusted distributional regression for monthly precipitation.
#[derive(Debug, Parser)]
#[command(name = "zadr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment config; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the configured synthetic dataset as CSV.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Destination CSV file.
        #[arg(long)]
        out: PathBuf,
        /// 600 rows instead of the configured size.
        #[arg(long)]
        quick: bool,
    },
    /// Fit one base learner and save it as JSON.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Base learner id, e.g. GAMLSS-ZAGA-Splines or DRF-ZAIG.
        #[arg(long)]
        learner: BaseLearner,
        /// Training CSV.
        #[arg(long)]
        data: PathBuf,
        /// Destination model file.
        #[arg(long)]
        out: PathBuf,
        /// 25 trees instead of the configured count.
        #[arg(long)]
        quick: bool,
    },
    /// Predict the configured quantile levels with a saved model.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// CSV with the rows to predict; the target column is ignored.
        #[arg(long)]
        data: PathBuf,
        /// Destination quantile CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score quantile CSVs against test targets.
    Evaluate {
        /// Quantile files; the algorithm id is the file stem without `quantiles_`.
        #[arg(long, required = true, num_args = 1..)]
        quantiles: Vec<PathBuf>,
        /// CSV whose targets are scored.
        #[arg(long)]
        test: PathBuf,
        /// CSV whose targets give the reference quantiles.
        #[arg(long)]
        train: PathBuf,
        /// Output directory for the report and summary tables.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full three-set protocol and write every result file.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated algorithm ids, overriding the config.
        #[arg(long)]
        algorithms: Option<String>,
        /// Smoke mode: 25 trees and 600 synthetic rows.
        #[arg(long)]
        quick: bool,
    },
}

fn overrides(common: &Common, quick: bool) -> Overrides {
    Overrides { seed: common.seed, quick, ..Default::default() }
}

fn config_path(common: &Common) -> Option<&Path> {
    common.config.as_deref()
}

fn execute(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Synth { common, out, quick } => {
            let cfg = load_config(config_path(&common), &overrides(&common, quick))?;
            let n = run::synth(&cfg, &out)?;
            println!("wrote {n} rows to {}", out.display());
        }
        Command::Fit { common, learner, data, out, quick } => {
            let cfg = load_config(config_path(&common), &overrides(&common, quick))?;
            run::fit_model(&cfg, learner, &data, &out)?;
            println!("wrote {learner} model to {}", out.display());
        }
        Command::Predict { common, model, data, out } => {
            let cfg = load_config(config_path(&common), &overrides(&common, false))?;
            let n = run::predict(&cfg, &model, &data, &out)?;
            println!("wrote {n} quantile rows to {}", out.display());
        }
        Command::Evaluate { quantiles, test, train, out } => {
            let report = run::evaluate_files(&quantiles, &test, &train, &out)?;
            for a in &report.algorithms {
                println!("{:<60} scoring rule {:>10.4}  skill {:>8.4}", a.id, a.mean_scoring_rule, a.scoring_rule_skill);
            }
        }
        Command::Experiment { common, out, algorithms, quick } => {
            let o = Overrides { out, algorithms: algorithms.as_deref().map(parse_algorithm_list), ..overrides(&common, quick) };
            let cfg = load_config(config_path(&common), &o)?;
            let manifest = run::run_experiment(&cfg)?;
            let total: f64 = manifest.stages.iter().map(|s| s.seconds).sum();
            println!(
                "{} algorithms, {} files in {} ({total:.1} s)",
                manifest.algorithms.len(),
                manifest.files.len() + 1,
                cfg.out.display()
            );
            if manifest.status == RunStatus::Partial {
                for a in manifest.failed() {
                    eprintln!("failed: {}: {}", a.id, a.error.as_deref().unwrap_or("unknown error"));
                }
                return Ok(ExitCode::from(CliError::Fit(String::new()).exit_code()));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("zadr: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
