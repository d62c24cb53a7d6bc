//! End-to-end tests of the `robustkf` binary.

use std::path::Path;
use std::process::{Command, Output};

fn robustkf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robustkf"))
        .args(args)
        .env_remove("ROBUSTKF_SEED")
        .output()
        .unwrap()
}

fn robustkf_env(args: &[&str], seed: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robustkf"))
        .args(args)
        .env("ROBUSTKF_SEED", seed)
        .output()
        .unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

/// Data rows (skipping the comment and header lines), split on commas.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(2)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn comment_seed(text: &str) -> u64 {
    let first = text.lines().next().unwrap();
    let seed = first
        .strip_prefix("# seed=")
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap();
    seed.parse().unwrap()
}

#[test]
fn flops_csv_prints_hand_values() {
    let out = robustkf(&["flops", "--n", "2", "--m", "1", "--t", "2"]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "n,m,t,s_kf,s_mckf\n2,1,2,110,272\n"
    );
}

#[test]
fn flops_json_has_counts() {
    let out = robustkf(&[
        "flops", "--n", "3", "--m", "1", "--t", "3", "--format", "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["s_kf"], 312.0);
    assert_eq!(v["s_mckf"], 1020.0);
}

#[test]
fn bad_arguments_exit_with_one() {
    assert_eq!(
        robustkf(&["simulate", "--sigma", "-1"]).status.code(),
        Some(1)
    );
    assert_eq!(
        robustkf(&["simulate", "--example", "3"]).status.code(),
        Some(1)
    );
    assert_eq!(
        robustkf(&["flops", "--n", "0", "--m", "1"]).status.code(),
        Some(1)
    );
    assert_eq!(robustkf(&["no-such-command"]).status.code(), Some(1));
}

#[test]
fn missing_or_malformed_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(
        robustkf(&["bench", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{ not json").unwrap();
    assert_eq!(
        robustkf(&["bench", "--config", broken.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    let zero_runs = dir.path().join("zero.json");
    std::fs::write(&zero_runs, r#"{"model":{"kind":"example1"},"noise":{"kind":"gaussian"},"runs":0,"filters":[{"kind":"kalman"}]}"#).unwrap();
    assert_eq!(
        robustkf(&["bench", "--config", zero_runs.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn bench_writes_one_row_per_filter_with_falling_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let status = robustkf(&[
        "bench",
        "--noise",
        "impulsive",
        "--runs",
        "10",
        "--steps",
        "200",
        "--out",
        out,
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );

    let iterations = read(&dir.path().join("iterations.csv"));
    assert_eq!(
        iterations.lines().nth(1).unwrap(),
        "filter,sigma,epsilon,avg_iterations,nonconverged_steps"
    );
    let table = rows(&iterations);
    assert_eq!(table.len(), 6);
    let sigmas: Vec<f64> = table.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(sigmas, [0.2, 0.5, 1.0, 2.0, 3.0, 10.0]);
    let avg: Vec<f64> = table.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(avg.windows(2).all(|w| w[1] <= w[0]), "{avg:?}");

    let mse = read(&dir.path().join("mse.csv"));
    assert_eq!(
        mse.lines().nth(1).unwrap(),
        "filter,sigma,epsilon,state_index,mse"
    );
    let mse_rows = rows(&mse);
    assert_eq!(mse_rows.len(), 7 * 2);
    assert_eq!(mse_rows[0][..3], ["KF", "", ""]);
    assert!(!dir.path().join("density_1.csv").exists());
}

#[test]
fn simulate_writes_density_tables_for_each_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let status = robustkf(&[
        "simulate",
        "--example",
        "2",
        "--noise",
        "impulsive-both",
        "--runs",
        "5",
        "--steps",
        "100",
        "--bins",
        "21",
        "--out",
        out,
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );

    let mse = rows(&read(&dir.path().join("mse.csv")));
    // KF and the default MCKF, three state components each
    assert_eq!(mse.len(), 6);
    assert!(mse.iter().all(|r| r[4].parse::<f64>().unwrap() > 0.0));
    for i in 1..=3 {
        let density = read(&dir.path().join(format!("density_{i}.csv")));
        assert_eq!(
            density.lines().nth(1).unwrap(),
            "filter,sigma,epsilon,bin_center,mass"
        );
        let table = rows(&density);
        assert_eq!(table.len(), 2 * 21);
        for filter in ["KF", "MCKF"] {
            let mass: f64 = table
                .iter()
                .filter(|r| r[0] == filter)
                .map(|r| r[4].parse::<f64>().unwrap())
                .sum();
            assert!((mass - 1.0).abs() < 1e-9, "{filter}: {mass}");
        }
    }
    assert!(!dir.path().join("density_4.csv").exists());
}

#[test]
fn json_format_writes_results_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let status = robustkf(&[
        "simulate", "--runs", "3", "--steps", "50", "--format", "json", "--seed", "9", "--out", out,
    ]);
    assert!(status.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("results.json"))).unwrap();
    assert_eq!(v["seed"], 9);
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(v["filters"].as_array().unwrap().len(), 2);
    assert_eq!(v["filters"][0]["filter"], "KF");
    assert!(v["filters"][0]["sigma"].is_null());
    assert!(!dir.path().join("mse.csv").exists());
}

#[test]
fn seed_precedence_is_flag_then_env_then_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"model":{"kind":"example1"},"noise":{"kind":"gaussian"},"runs":2,"steps":20,"seed":77,"filters":[{"kind":"kalman"}]}"#)
        .unwrap();
    let cfg = config.to_str().unwrap();
    let seed_of = |out: &Output, name: &str| {
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        comment_seed(&read(&dir.path().join(name).join("mse.csv")))
    };
    let dir_arg = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    let file_only = robustkf(&["bench", "--config", cfg, "--out", &dir_arg("a")]);
    assert_eq!(seed_of(&file_only, "a"), 77);
    let env = robustkf_env(&["bench", "--config", cfg, "--out", &dir_arg("b")], "5");
    assert_eq!(seed_of(&env, "b"), 5);
    let flag = robustkf_env(
        &[
            "bench",
            "--config",
            cfg,
            "--seed",
            "3",
            "--out",
            &dir_arg("c"),
        ],
        "5",
    );
    assert_eq!(seed_of(&flag, "c"), 3);
    let default = robustkf(&[
        "bench",
        "--runs",
        "2",
        "--steps",
        "20",
        "--out",
        &dir_arg("d"),
    ]);
    assert_eq!(seed_of(&default, "d"), 1);

    let bad_env = robustkf_env(
        &["bench", "--config", cfg, "--out", &dir_arg("e")],
        "not-a-number",
    );
    assert_eq!(bad_env.status.code(), Some(1));
}

#[test]
fn different_seeds_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let status = robustkf(&[
            "bench",
            "--runs",
            "3",
            "--steps",
            "50",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(status.status.success());
        rows(&read(&out.join("mse.csv")))
    };
    assert_ne!(run("1", "a"), run("2", "b"));
}

#[test]
fn diagnose_prints_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = robustkf(&[
        "diagnose",
        "--noise",
        "impulsive",
        "--step",
        "5",
        "--sigma",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let sigma_min = v["sigma_min"].as_f64().unwrap();
    assert!(sigma_min > 0.0);
    assert!(
        sigma_min
            >= v["sigma_star"]
                .as_f64()
                .unwrap()
                .max(v["sigma_dagger"].as_f64().unwrap())
                * (1.0 - 1e-12)
    );
    assert_eq!(
        v["sigma_is_sufficient"],
        serde_json::Value::Bool(2.0 >= sigma_min)
    );
    assert_eq!(v["step"], 5);
    let written: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("certificate.json"))).unwrap();
    assert_eq!(written, v);
}

#[test]
fn diagnose_rejects_step_out_of_range() {
    let out = robustkf(&["diagnose", "--step", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = robustkf(&["diagnose", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
}
