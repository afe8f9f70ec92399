use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use zadr::ensemble::roster;
use zadr_cli::output::{self, read_quantile_csv};
use zadr_cli::{RunManifest, RunStatus};

fn zadr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zadr")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join(output::MANIFEST)).unwrap()).unwrap()
}

fn names(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn quick_run_is_complete_and_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = zadr(&["experiment", "--quick", "--seed", "11", "--out", dir.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }

    let m = manifest(&a);
    assert_eq!(m.status, RunStatus::Complete);
    assert_eq!(m.algorithms.len(), 17);
    let listed: BTreeSet<String> = m.files.iter().map(|f| f.name.clone()).chain([output::MANIFEST.into()]).collect();
    assert_eq!(listed, names(&a));
    for f in &m.files {
        let bytes = fs::read(a.join(&f.name)).unwrap();
        assert_eq!(output::sha256_hex(&bytes), f.sha256, "{}", f.name);
    }
    assert_eq!(m.config_sha256, output::sha256_hex(m.config.to_json().as_bytes()));

    for spec in roster() {
        let (grid, q) = read_quantile_csv(&a.join(output::quantile_file_name(&spec.id))).unwrap();
        assert_eq!(grid.len(), 17);
        assert_eq!(q.n_rows(), 200);
        assert!(q.is_valid(), "{}", spec.id);
    }

    // everything but the manifest (wall times, output path) is byte-identical
    assert_eq!(names(&a), names(&b));
    for name in names(&a) {
        if name != output::MANIFEST {
            let same = fs::read(a.join(&name)).unwrap() == fs::read(b.join(&name)).unwrap();
            assert!(same, "{name} differs between runs");
        }
    }
    assert_eq!(manifest(&b).files, m.files);
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let dir = tmp.path().join(format!("t{threads}"));
        let o = Command::new(env!("CARGO_BIN_EXE_zadr"))
            .args(["experiment", "--quick", "--seed", "5", "--out", dir.to_str().unwrap()])
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        manifest(&dir).files
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn rerun_into_the_same_directory_replaces_old_results() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let o = zadr(&["experiment", "--quick", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = zadr(&["experiment", "--quick", "--out", out.to_str().unwrap(), "--algorithms", "GAMLSS-ZAIG,DRF-ZAIG"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m.algorithms.len(), 2);
    let expected: BTreeSet<String> = [
        "fig5_scoring_rule_skill.csv",
        "fig6_skill_and_ranks.csv",
        "fig7_coverage.csv",
        "manifest.json",
        "quantiles_DRF-ZAIG.csv",
        "quantiles_GAMLSS-ZAIG.csv",
        "report.json",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    assert_eq!(names(&out), expected);
}

#[test]
fn corrupt_csv_is_a_data_error_without_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data.csv");
    let o = zadr(&["synth", "--quick", "--out", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut text = fs::read_to_string(&data).unwrap();
    text.push_str("1.0,2.0,oops,4,5,6,7,8,9,10\n");
    fs::write(&data, text).unwrap();
    let cfg = write_config(tmp.path(), &format!(r#"{{"input": {{"csv": {{"path": {:?}}}}}}}"#, data));
    let out = tmp.path().join("out");
    let o = zadr(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("oops"), "{}", stderr(&o));
    assert!(!out.join(output::MANIFEST).exists());
    assert!(!out.join(output::REPORT).exists());
}

#[test]
fn config_errors_exit_with_the_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), r#"{"tau_grid": [0.1, 0.5, 1.5]}"#);
    let o = zadr(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tau_grid") && stderr(&o).contains("1.5"), "{}", stderr(&o));

    let cfg = write_config(tmp.path(), r#"{"forest": {"trees": 10}}"#);
    let o = zadr(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("forest"), "{}", stderr(&o));

    let o = zadr(&["experiment", "--quick", "--algorithms", "Mean_nothing", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn failing_learners_give_the_fit_code_and_a_partial_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // leaves of 300 rows cannot fit in the 400-row training union
    let cfg = write_config(
        tmp.path(),
        r#"{"input": {"synthetic": {"n": 600}}, "forest": {"n_trees": 5, "min_leaf": 300}}"#,
    );
    let o = zadr(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m.status, RunStatus::Partial);
    for a in &m.algorithms {
        assert_eq!(a.succeeded, !a.id.contains("DRF-"), "{}", a.id);
        assert_eq!(out.join(output::quantile_file_name(&a.id)).exists(), a.succeeded);
    }
    let listed: BTreeSet<String> = m.files.iter().map(|f| f.name.clone()).chain([output::MANIFEST.into()]).collect();
    assert_eq!(listed, names(&out));
}

#[test]
fn stages_run_separately_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    let ok = |o: Output| assert!(o.status.success(), "{}", stderr(&o));
    ok(zadr(&["synth", "--quick", "--seed", "3", "--out", &p("train.csv")]));
    ok(zadr(&["synth", "--quick", "--seed", "4", "--out", &p("test.csv")]));
    ok(zadr(&["fit", "--learner", "DRF-ZAGA", "--quick", "--data", &p("train.csv"), "--out", &p("drf.json")]));
    ok(zadr(&["fit", "--learner", "GAMLSS-ZAGA", "--data", &p("train.csv"), "--out", &p("gamlss.json")]));
    ok(zadr(&["predict", "--model", &p("drf.json"), "--data", &p("test.csv"), "--out", &p("quantiles_DRF-ZAGA.csv")]));
    ok(zadr(&["predict", "--model", &p("gamlss.json"), "--data", &p("test.csv"), "--out", &p("quantiles_GAMLSS-ZAGA.csv")]));
    ok(zadr(&[
        "evaluate",
        "--quantiles",
        &p("quantiles_DRF-ZAGA.csv"),
        &p("quantiles_GAMLSS-ZAGA.csv"),
        "--test",
        &p("test.csv"),
        "--train",
        &p("train.csv"),
        "--out",
        &p("eval"),
    ]));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("eval/report.json")).unwrap()).unwrap();
    let ids: Vec<&str> = report["algorithms"].as_array().unwrap().iter().map(|a| a["id"].as_str().unwrap()).collect();
    assert_eq!(ids, vec!["DRF-ZAGA", "GAMLSS-ZAGA"]);
    assert_eq!(report["n_test"], 600);

    let o = zadr(&["fit", "--learner", "GAMLSS-ZAXX", "--data", &p("train.csv"), "--out", &p("x.json")]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(tmp.path().join("broken.json"), "{\"format_version\": 1").unwrap();
    let o = zadr(&["predict", "--model", &p("broken.json"), "--data", &p("test.csv"), "--out", &p("q.csv")]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}
