use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use recsys_evalkit::evalstats::{EvalReport, Verdict};
use recsys_evalkit::models::ModelFamily;
use recsys_evalkit_cli::commands::read_json;
use recsys_evalkit_cli::config::{ExperimentConfig, ModelConfig};
use recsys_evalkit_cli::sidecar::ScoreTable;
use recsys_evalkit_cli::{cmd_compare, cmd_preprocess, cmd_run, cmd_simulate, cmd_split, cmd_trace, OUT_ENV};

/// Three taste groups; every user rates a fixed share of their group's items.
fn write_log(path: &Path, users: usize, items: usize) {
    let mut text = String::new();
    for u in 0..users {
        for i in 0..items {
            let liked = u % 3 == i % 3 && (u * 7 + i * 3) % 5 != 0;
            let noise = (u * 13 + i * 11) % 17 == 0;
            if liked || noise {
                let rating = if liked { 4 + (u + i) % 2 } else { 2 };
                text.push_str(&format!("{u}\t{i}\t{rating}\t{}\n", 880_000_000 + u * 997 + i * 31));
            }
        }
    }
    fs::write(path, text).unwrap();
}

fn setup(families: &[ModelFamily]) -> (tempfile::TempDir, ExperimentConfig) {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("ratings.tsv");
    write_log(&raw, 90, 45);
    let mut c = ExperimentConfig::default();
    c.dataset.path = Some(raw);
    c.dataset.name = Some("synthetic".into());
    c.output.dir = dir.path().join("out");
    c.models = families.iter().map(|&f| ModelConfig::new(f)).collect();
    c.search.budget = 4;
    c.stats.n_resamples = 1000;
    (dir, c)
}

fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.clone(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn preprocess_is_deterministic_and_writes_canonical_files() {
    let (dir, c) = setup(&[ModelFamily::Popularity]);
    let s = cmd_preprocess(&c).unwrap();
    assert_eq!(s.threshold, 4);
    assert!(s.filtered.users <= s.binarized.users && s.filtered.users > 0);
    let processed = dir.path().join("out/processed");
    let first = read_tree(&processed);
    let names: Vec<_> = first.iter().map(|(p, _)| p.file_name().unwrap().to_str().unwrap().to_string()).collect();
    assert_eq!(names, ["dataset.items.txt", "dataset.tsv", "dataset.users.txt", "stats.json"]);
    cmd_preprocess(&c).unwrap();
    assert_eq!(read_tree(&processed), first);
    assert!(dir.path().join("out/manifests/preprocess.json").is_file());
}

#[test]
fn l_one_passes_positive_data_through() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("r.tsv");
    fs::write(&raw, "a\tx\t5\t1\na\ty\t4\t2\nb\ty\t5\t3\nc\tz\t4\t4\n").unwrap();
    let mut c = ExperimentConfig::default();
    c.dataset.path = Some(raw);
    c.dataset.l = 1;
    c.output.dir = dir.path().join("out");
    let s = cmd_preprocess(&c).unwrap();
    assert_eq!((s.filtered.users, s.filtered.items, s.filtered.ratings), (3, 3, 4));
    assert_eq!(s.filtered, s.binarized);
}

#[test]
fn empty_core_names_l() {
    let (_dir, mut c) = setup(&[ModelFamily::Popularity]);
    c.dataset.l = 1000;
    let err = format!("{:#}", cmd_preprocess(&c).unwrap_err());
    assert!(err.contains("1000-core"), "{err}");
}

#[test]
fn run_writes_reports_sidecars_and_table() {
    let (dir, c) = setup(&[ModelFamily::Popularity, ModelFamily::ItemKNN]);
    cmd_preprocess(&c).unwrap();
    let split = cmd_split(&c).unwrap();
    assert_eq!(split.plan.k, 5);
    let summary = cmd_run(&c).unwrap();
    assert_eq!(summary.reports.len(), 2);
    let out = dir.path().join("out");
    for family in ["Popularity", "ItemKNN"] {
        let report: EvalReport = read_json(&out.join(format!("reports/{family}.json"))).unwrap();
        assert_eq!(report.fold_scores.len(), 5);
        assert!(report.ci.lo <= report.mean && report.mean <= report.ci.hi);
        assert_eq!(report.config_digest, c.digest());
        assert_eq!(report.report_metrics.len(), 3);
        let table = ScoreTable::read(fs::File::open(out.join(format!("reports/{family}.scores.bin"))).unwrap()).unwrap();
        assert_eq!(table.metrics[0], "hitrate@50");
        for (f, fold) in table.folds.iter().zip(&report.folds) {
            assert_eq!(f.users.len(), fold.users.len());
            let mean = f.scores[0].iter().sum::<f64>() / f.scores[0].len() as f64;
            assert_eq!(mean, f.means[0]);
            assert!((f.means[0] - report.fold_scores[fold.fold]).abs() < 1e-5);
        }
        for i in 0..5 {
            assert!(out.join(format!("models/{family}/fold{i}.model")).is_file());
        }
    }
    let csv = fs::read_to_string(out.join("reports/scores_table.csv")).unwrap();
    assert!(csv.starts_with("model,metric,fold,score\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 4 * 5);

    let pop = out.join("reports/Popularity.json");
    let itemknn = out.join("reports/ItemKNN.json");
    let same = cmd_compare(&c, &pop, &pop).unwrap();
    assert_eq!(same.pooled_test.as_ref().unwrap().p_value, 1.0);
    assert_eq!(same.ci_a, same.ci_b);
    assert_eq!(same.verdict, Verdict::NotSeparable);
    let cross = cmd_compare(&c, &pop, &itemknn).unwrap();
    assert_eq!(cross.fold_tests.len(), 5);
    assert!(out.join("compare/Popularity_vs_ItemKNN.json").is_file());

    let mut other: EvalReport = read_json(&itemknn).unwrap();
    other.dataset_digest = "0".repeat(64);
    let tampered = dir.path().join("tampered.json");
    fs::write(&tampered, serde_json::to_string(&other).unwrap()).unwrap();
    assert!(cmd_compare(&c, &pop, &tampered).is_err());
}

#[test]
fn failed_study_is_quarantined() {
    let (dir, mut c) = setup(&[ModelFamily::Popularity, ModelFamily::Ease]);
    c.fit.options.memory_budget_bytes = 16;
    c.search.budget = 2;
    cmd_preprocess(&c).unwrap();
    let err = format!("{:#}", cmd_run(&c).unwrap_err());
    assert!(err.contains("Ease"), "{err}");
    let out = dir.path().join("out");
    assert!(out.join("reports/Popularity.json").is_file());
    assert!(!out.join("reports/Ease.json").exists());
    let reason = fs::read_to_string(out.join("failed/Ease/error.txt")).unwrap();
    assert!(reason.contains("resource limit"), "{reason}");
}

#[test]
fn trace_honours_budget_and_normalization() {
    let (dir, mut c) = setup(&[ModelFamily::ItemKNN]);
    c.search.budget = 6;
    cmd_preprocess(&c).unwrap();
    let t = cmd_trace(&c).unwrap();
    assert_eq!(t.traces.len(), 3);
    for (trace, curve) in t.traces.iter().zip(&t.normalized) {
        assert!(trace.trials.len() <= 6);
        let values: Vec<f64> = curve.iter().flatten().copied().collect();
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
        assert!(values.iter().all(|&v| v <= 1.0));
        let csv = fs::read_to_string(dir.path().join(format!("out/traces/ItemKNN_{}.csv", trace.strategy))).unwrap();
        assert!(csv.lines().count() <= 7);
    }
    assert!(t.normalized.iter().any(|c| c.iter().flatten().any(|&v| v == 1.0)));
    assert!(dir.path().join("out/traces/ItemKNN_normalized.csv").is_file());
}

#[test]
fn simulate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::default().with_overrides(Some(3), Some(dir.path().to_path_buf()));
    c.simulate.n_users = 300;
    c.simulate.max_test_size = 5;
    let t = cmd_simulate(&c).unwrap();
    assert_eq!(t.rows.len(), 5 * 4);
    let csv = fs::read_to_string(dir.path().join("simulate/simulation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 20);
}

#[test]
fn binary_exit_codes_and_output_env() {
    let bin = env!("CARGO_BIN_EXE_recsys-evalkit");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[search]\nbudget = 0\n").unwrap();
    let status = Command::new(bin).args(["--config", bad.to_str().unwrap(), "simulate"]).output().unwrap().status;
    assert!(!status.success());

    let cfg = dir.path().join("sim.toml");
    fs::write(&cfg, "[simulate]\nn_users = 50\nmax_test_size = 3\n").unwrap();
    let env_out = dir.path().join("from_env");
    let output = Command::new(bin)
        .args(["--config", cfg.to_str().unwrap(), "--jobs", "1", "simulate"])
        .env(OUT_ENV, &env_out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(env_out.join("simulate/simulation.csv").is_file());

    let flag_out = dir.path().join("from_flag");
    let status = Command::new(bin)
        .args(["--config", cfg.to_str().unwrap(), "--out", flag_out.to_str().unwrap(), "simulate"])
        .env(OUT_ENV, &env_out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(flag_out.join("simulate/simulation.csv").is_file());

    let missing = Command::new(bin)
        .args(["--out", dir.path().join("none").to_str().unwrap(), "run"])
        .status()
        .unwrap();
    assert!(!missing.success());
}
