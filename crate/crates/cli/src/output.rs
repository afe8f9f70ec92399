//! Result files. Numbers use Rust's shortest round-trip formatting, so equal
//! results give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zadr::ensemble::{QuantileMatrix, TauGrid};
use zadr::metrics::EvaluationReport;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const REPORT: &str = "report.json";
pub const FIG5: &str = "fig5_scoring_rule_skill.csv";
pub const FIG6: &str = "fig6_skill_and_ranks.csv";
pub const FIG7: &str = "fig7_coverage.csv";
pub const MANIFEST: &str = "manifest.json";
const QUANTILE_PREFIX: &str = "quantiles_";
const LEVEL_PREFIX: &str = "q";

pub fn quantile_file_name(id: &str) -> String {
    format!("{QUANTILE_PREFIX}{id}.csv")
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn is_generated(name: &str) -> bool {
    matches!(name, REPORT | FIG5 | FIG6 | FIG7 | MANIFEST)
        || name == format!("{MANIFEST}.tmp")
        || (name.starts_with(QUANTILE_PREFIX) && name.ends_with(".csv"))
}

/// Creates `dir` and clears files left by an earlier run. Anything else in
/// the directory is refused, since the manifest must describe it exactly.
pub fn prepare_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.file_type()?.is_file() && is_generated(&name) {
            fs::remove_file(entry.path())?;
        } else {
            return Err(CliError::Config(format!(
                "output directory {} contains `{name}`, which this tool did not write",
                dir.display()
            )));
        }
    }
    Ok(())
}

pub fn quantile_csv(grid: &TauGrid, q: &QuantileMatrix) -> String {
    let mut s = grid.levels().iter().map(|t| format!("{LEVEL_PREFIX}{}", num(*t))).collect::<Vec<_>>().join(",");
    s.push('\n');
    for row in q.rows() {
        s.push_str(&row.iter().map(|v| num(*v)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

/// Reads a file written by [`quantile_csv`]; the levels come from the header.
pub fn read_quantile_csv(path: &Path) -> Result<(TauGrid, QuantileMatrix), CliError> {
    let data_err = |m: String| CliError::Data(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| data_err(e.to_string()))?;
    let header = rdr.headers().map_err(|e| data_err(e.to_string()))?.clone();
    let levels = header
        .iter()
        .map(|h| {
            h.trim()
                .strip_prefix(LEVEL_PREFIX)
                .and_then(|t| t.parse::<f64>().ok())
                .ok_or_else(|| data_err(format!("header cell `{h}` is not a level like `q0.5`")))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let grid = TauGrid::new(levels).map_err(|e| data_err(e.to_string()))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| data_err(format!("row {}: {e}", i + 1)))?;
        let row = rec
            .iter()
            .map(|c| c.trim().parse::<f64>().map_err(|_| data_err(format!("row {}: `{c}` is not a number", i + 1))))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    let q = QuantileMatrix::from_rows(rows, grid.len()).map_err(|e| data_err(e.to_string()))?;
    Ok((grid, q))
}

/// Scoring-rule skill table: one row per algorithm.
pub fn fig5_csv(r: &EvaluationReport) -> String {
    let mut s = String::from("algorithm,mean_scoring_rule,scoring_rule_skill\n");
    for a in &r.algorithms {
        let _ = writeln!(s, "{},{},{}", a.id, num(a.mean_scoring_rule), num(a.scoring_rule_skill));
    }
    s
}

/// Per-level score, skill and rank in long form: one row per algorithm and level.
pub fn fig6_csv(r: &EvaluationReport) -> String {
    let mut s = String::from("algorithm,tau,median_quantile_score,skill,rank\n");
    for a in &r.algorithms {
        for (j, t) in r.levels.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                a.id,
                num(*t),
                num(a.median_quantile_score[j]),
                num(a.quantile_skill[j]),
                num(a.quantile_rank[j])
            );
        }
    }
    s
}

/// Coverage per algorithm (rows) and level (columns).
pub fn fig7_csv(r: &EvaluationReport) -> String {
    let mut s = String::from("algorithm");
    for t in &r.levels {
        let _ = write!(s, ",{}", num(*t));
    }
    s.push('\n');
    for a in &r.algorithms {
        s.push_str(&a.id);
        for c in &a.coverage {
            let _ = write!(s, ",{}", num(*c));
        }
        s.push('\n');
    }
    s
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes `report.json` and the three summary tables.
pub fn write_evaluation(dir: &Path, report_json: &str, r: &EvaluationReport) -> Result<(), CliError> {
    write_file(dir, REPORT, report_json)?;
    write_file(dir, FIG5, &fig5_csv(r))?;
    write_file(dir, FIG6, &fig6_csv(r))?;
    write_file(dir, FIG7, &fig7_csv(r))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    /// Some algorithms failed; their files are absent.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmStatus {
    pub id: String,
    pub succeeded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

/// Run summary. `files` lists every file in the output directory except the
/// manifest itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub status: RunStatus,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub stages: Vec<StageTime>,
    pub algorithms: Vec<AlgorithmStatus>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn failed(&self) -> impl Iterator<Item = &AlgorithmStatus> {
        self.algorithms.iter().filter(|a| !a.succeeded)
    }
}

/// Every regular file in `dir` except the manifest, sorted by name.
pub fn inventory(dir: &Path) -> Result<Vec<FileEntry>, CliError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == MANIFEST || !entry.file_type()?.is_file() {
            continue;
        }
        let bytes = fs::read(entry.path())?;
        files.push(FileEntry { name, bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
    }
    files.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(files)
}

/// Writes the manifest through a temporary file and a rename.
pub fn write_manifest(dir: &Path, m: &RunManifest) -> Result<(), CliError> {
    let tmp = dir.join(format!("{MANIFEST}.tmp"));
    let text = serde_json::to_string_pretty(m).map_err(|e| CliError::Io(e.to_string()))?;
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(MANIFEST))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use zadr::metrics::evaluate;

    fn toy() -> (TauGrid, QuantileMatrix, Vec<f64>) {
        let grid = TauGrid::new(vec![0.25, 0.75]).unwrap();
        let q = QuantileMatrix::from_rows(vec![vec![0.0, 1.5], vec![1.0, 2.0], vec![0.5, 3.25]], 2).unwrap();
        (grid, q, vec![0.0, 1.5, 4.0])
    }

    #[test]
    fn quantile_csv_round_trips() {
        let (grid, q, _) = toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        fs::write(&path, quantile_csv(&grid, &q)).unwrap();
        let (g, back) = read_quantile_csv(&path).unwrap();
        assert_eq!(g, grid);
        assert_eq!(back, q);
        assert!(quantile_csv(&grid, &q).starts_with("q0.25,q0.75\n0.0,1.5\n"));
    }

    #[test]
    fn malformed_quantile_csv_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        fs::write(&path, "q0.25,q0.75\n1.0,x\n").unwrap();
        assert_eq!(read_quantile_csv(&path).unwrap_err().exit_code(), 3);
        fs::write(&path, "a,b\n1.0,2.0\n").unwrap();
        assert_eq!(read_quantile_csv(&path).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn summary_tables_have_one_line_per_entry() {
        let (grid, q, y) = toy();
        let r = evaluate(&[("a", &q), ("b", &q)], &y, &[0.0, 1.0, 2.0, 3.0], &grid).unwrap();
        assert_eq!(fig5_csv(&r).lines().count(), 3);
        assert_eq!(fig6_csv(&r).lines().count(), 1 + 2 * 2);
        let fig7 = fig7_csv(&r);
        assert_eq!(fig7.lines().next().unwrap(), "algorithm,0.25,0.75");
        assert_eq!(fig7.lines().count(), 3);
    }

    #[test]
    fn foreign_files_block_the_output_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(REPORT), "{}").unwrap();
        fs::write(dir.path().join(quantile_file_name("X")), "").unwrap();
        prepare_out_dir(dir.path()).unwrap();
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
        fs::write(dir.path().join("notes.txt"), "mine").unwrap();
        assert_eq!(prepare_out_dir(dir.path()).unwrap_err().exit_code(), 2);
    }
}
