//! End-to-end runs of the `varag` binary and the suite API.

use std::path::Path;
use std::process::Command;

use varag::data::{synthetic_classification, write_libsvm_file};
use varag::{d0, FiniteSumProblem, Regime, RunTrace};
use varag_cli::{run_suite, Loss, Manifest, RunConfig, Solver};

fn varag_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_varag"))
}

fn small_config() -> RunConfig {
    let mut cfg = RunConfig {
        solvers: vec![Solver::Varag, Solver::ProxSvrg],
        seeds: vec![0, 1, 2],
        epochs: 6,
        regime: Regime::Smooth,
        ..Default::default()
    };
    cfg.problem.m = 48;
    cfg.problem.n = 8;
    cfg
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn suite_writes_one_trace_per_run_and_replays_identically() {
    let cfg = small_config();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let manifest = run_suite(&cfg, a.path()).unwrap();
    run_suite(&cfg, b.path()).unwrap();
    assert_eq!(manifest.runs.len(), 6);
    assert!(manifest.failures.is_empty());
    let files = read_dir_sorted(a.path());
    assert_eq!(files.len(), 7);
    assert_eq!(files, read_dir_sorted(b.path()));
    assert_eq!(manifest.config_hash, cfg.hash());
    assert_eq!(Manifest::read(a.path()).unwrap(), manifest);
    for r in &manifest.runs {
        let t = RunTrace::read_csv(a.path().join(&r.file)).unwrap();
        t.validate().unwrap();
        assert_eq!(t.header.seed, r.seed);
        assert_eq!(t.last().unwrap().grad_evals, r.grad_evals);
    }
}

#[test]
fn manifest_d0_is_reproducible() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let manifest = run_suite(&cfg, dir.path()).unwrap();
    let inst = varag_cli::build_instance(&cfg.problem, cfg.oracle_tol).unwrap();
    let p: &FiniteSumProblem = &inst.problem;
    let again = d0(p, &manifest.x0, manifest.psi_star, &manifest.x_star, manifest.problem.l).unwrap();
    assert!((again - manifest.d0).abs() <= 1e-9 * manifest.d0.abs());
}

#[test]
fn gap_threshold_stops_no_later_than_full_budget() {
    let mut cfg = small_config();
    cfg.epochs = 30;
    let full = tempfile::tempdir().unwrap();
    let full = run_suite(&cfg, full.path()).unwrap();
    cfg.gap_threshold = Some(1e-3);
    let early = tempfile::tempdir().unwrap();
    let early = run_suite(&cfg, early.path()).unwrap();
    for (a, b) in early.runs.iter().zip(&full.runs) {
        assert!(a.grad_evals <= b.grad_evals);
        if let Some(e) = a.evals_to_threshold {
            assert_eq!(e, a.grad_evals);
        }
    }
}

#[test]
fn failures_are_recorded_and_all_failed_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let status = varag_bin()
        .args(["bench", "--loss", "eb-quadratic", "--m", "20", "--n", "5", "--rank", "3"])
        .args(["--regime", "error-bound", "--solvers", "stochastic-varag", "--seeds", "2", "--epochs", "2"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    let manifest = Manifest::read(dir.path()).unwrap();
    assert!(manifest.runs.is_empty());
    assert_eq!(manifest.failures.len(), 2);
}

#[test]
fn bench_then_verify_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out = varag_bin()
        .args(["bench", "--loss", "logistic", "--m", "32", "--n", "6", "--regime", "smooth"])
        .args(["--epochs", "5", "--seeds", "10"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let verify = varag_bin().arg("verify").arg("--out").arg(dir.path()).output().unwrap();
    let text = String::from_utf8_lossy(&verify.stdout);
    assert!(verify.status.success(), "{text}");
    assert!(text.contains("PASS"));

    let too_few = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        seeds: vec![0, 1],
        ..small_config()
    };
    run_suite(&cfg, too_few.path()).unwrap();
    let verify = varag_bin().arg("verify").arg("--out").arg(too_few.path()).output().unwrap();
    assert_eq!(verify.status.code(), Some(2));
}

#[test]
fn config_file_and_dataset_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic_classification(40, 5, 1.0, 3).unwrap();
    let data_path = dir.path().join("toy.libsvm");
    write_libsvm_file(&data, &data_path).unwrap();
    let mut cfg = small_config();
    cfg.problem.dataset = Some(data_path);
    cfg.problem.loss = Loss::Logistic;
    cfg.problem.lambda = 1e-3;
    let cfg_path = dir.path().join("run.json");
    std::fs::write(&cfg_path, serde_json::to_vec(&cfg).unwrap()).unwrap();

    let trace_path = dir.path().join("one.csv");
    let out = varag_bin()
        .args(["solve", "--config"])
        .arg(&cfg_path)
        .args(["--seeds", "4..5", "--out"])
        .arg(&trace_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = RunTrace::read_csv(&trace_path).unwrap();
    assert_eq!(t.header.seed, 4);
    assert_eq!(t.header.m, 40);
    assert_eq!(t.records.len(), 7);

    let oracle = varag_bin().args(["oracle", "--config"]).arg(&cfg_path).output().unwrap();
    let report: serde_json::Value = serde_json::from_slice(&oracle.stdout).unwrap();
    assert_eq!(report["m"], 40);
    assert!(report["d0"].as_f64().unwrap() > 0.0);
}

#[test]
fn generated_instance_export() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eb.json");
    let out = varag_bin()
        .args(["gen-eb", "--m", "12", "--n", "4", "--rank", "2", "--data-seed", "9", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(v["components"].as_array().unwrap().len(), 12);
    assert_eq!(v["components"][0]["q_mat"].as_array().unwrap().len(), 16);
    assert!(v["mu_bar"].as_f64().unwrap() > 0.0);
}

#[test]
fn malformed_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.libsvm");
    std::fs::write(&bad, "1 1:0.5\n-1 3:1 2:4\n").unwrap();
    let out = varag_bin().args(["oracle", "--dataset"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}
