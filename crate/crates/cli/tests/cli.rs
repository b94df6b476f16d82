use std::path::Path;
use std::process::{Command, Output};

fn hwnas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hwnas")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn gen_bench(dir: &Path) -> String {
    let path = dir.join("bench.csv");
    let out = hwnas(&["gen-bench", "--seed", "1", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path.to_str().unwrap().to_owned()
}

#[test]
fn gen_bench_writes_the_full_table() {
    let dir = tempfile::tempdir().unwrap();
    let bench = gen_bench(dir.path());
    let text = std::fs::read_to_string(bench).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "arch_str,cifar10_test,cifar100_test,in16_test,macs_m,edgegpu_ms,raspi4_ms,edgetpu_ms,pixel3_ms,eyeriss_ms,fpga_ms"
    );
    assert_eq!(lines.count(), 15_625);
}

#[test]
fn tabular_search_writes_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let bench = gen_bench(dir.path());
    let out_path = dir.path().join("run.jsonl");
    let args = [
        "search",
        "--bench",
        &bench,
        "--estimator",
        "tabular",
        "--metric",
        "latency",
        "--device",
        "pixel3",
        "--omega",
        "6",
        "--gens",
        "10",
        "--seed",
        "4",
        "--out",
        out_path.to_str().unwrap(),
    ];
    let out = hwnas(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 1);
    let rec: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(rec["seed"], 4);
    assert_eq!(rec["config"]["constraint"]["query"]["device"], "pixel3");
    assert_eq!(rec["best"]["psi"], 0.0);

    // the same command reproduces the same best
    let again = dir.path().join("again.jsonl");
    let mut args2 = args.to_vec();
    *args2.last_mut().unwrap() = again.to_str().unwrap();
    assert!(hwnas(&args2).status.success());
    let rec2: serde_json::Value = serde_json::from_str(std::fs::read_to_string(&again).unwrap().trim()).unwrap();
    assert_eq!(rec["best"], rec2["best"]);
    assert_eq!(rec["history"], rec2["history"]);
}

#[test]
fn surrogate_search_prints_to_stdout() {
    let out = hwnas(&["search", "--omega", "40", "--gens", "2", "--pop", "4", "--epochs", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(rec["config"]["estimator"], "rmi");
    assert!(rec["best"]["cost"]["value"].as_f64().unwrap() <= 40.0);
}

#[test]
fn sweep_emits_one_summary_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let bench = gen_bench(dir.path());
    let runs = dir.path().join("runs.jsonl");
    let out = hwnas(&[
        "sweep",
        "--bench",
        &bench,
        "--metric",
        "latency",
        "--devices",
        "edgegpu,raspi4",
        "--omegas",
        "3,5,8",
        "--seeds",
        "2",
        "--gens",
        "5",
        "--out",
        runs.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().count(), 6);
    assert_eq!(std::fs::read_to_string(&runs).unwrap().lines().count(), 12);
}

#[test]
fn ablation_flags_unreachable_thresholds() {
    let out = hwnas(&[
        "ablate-rejection",
        "--omegas",
        "1000,40,0.1",
        "--runs",
        "3",
        "--max-attempts",
        "5000",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<serde_json::Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["rejection_mean"], 50.0);
    assert!(rows.iter().all(|r| r["penalty_samples"] == 50));
    assert_eq!(rows[2]["halted_runs"], 3);
    assert!(rows[2]["rejection_mean"].is_null());
}

#[test]
fn stats_reports_the_top_k_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let bench = gen_bench(dir.path());
    let out = hwnas(&["stats", "--bench", &bench, "--top-k", "10"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["top_k"], 10);
    assert_eq!(v["feasible"], 15_625);
    let total: f64 = v["ops"]
        .as_object()
        .unwrap()
        .values()
        .map(|x| x.as_f64().unwrap())
        .sum();
    assert!((total - 6.0).abs() < 1e-12);
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    for args in [
        vec!["search", "--estimator", "tabular"],
        vec!["search", "--device", "toaster"],
        vec!["search", "--omega", "-3"],
        vec!["stats", "--bench", "/definitely/missing.csv"],
        vec!["ablate-rejection", "--metric", "latency", "--omegas", "3"],
    ] {
        let out = hwnas(&args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("error"), "{err}");
    }
}
