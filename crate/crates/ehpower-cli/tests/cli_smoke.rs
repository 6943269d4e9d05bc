//! End-to-end checks of the `ehpower` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use ehpower_cli::report::{read_bounds_csv, read_simulate_csv, read_sweep_csv, SweepRow};

fn ehpower(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehpower"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn tmp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("ehpower-smoke-{}-{name}", std::process::id()));
    p
}

#[test]
fn bounds_reports_the_upper_bound() {
    let out = ehpower(&["bounds", "--dist", "bernoulli:p=0.1", "--bbar", "10", "--gamma", "1"]);
    let row = read_bounds_csv(&stdout(&out)).unwrap();
    assert_eq!(row.mu, 1.0);
    assert!((row.upper - 0.5).abs() < 1e-15);
    assert!(row.ff_bernoulli_exact.is_some());

    // 0.5*log2(11) with a clipped-mean of 10
    let out = ehpower(&["bounds", "--dist", "uniform:lo=0,hi=20", "--bbar", "20", "--gamma", "1"]);
    let row = read_bounds_csv(&stdout(&out)).unwrap();
    assert!((row.upper - 1.7297158093186493).abs() < 1e-12);
    assert!(row.ff_bernoulli_exact.is_none());
}

#[test]
fn bounds_emits_json_when_asked() {
    let out = ehpower(&[
        "bounds", "--dist", "bernoulli:p=0.5", "--bbar", "2", "--gamma", "1", "--format", "json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["mu"], 1.0);
    assert!(v["greedy_bernoulli"].is_number());
}

#[test]
fn simulate_deterministic_case_is_exact() {
    let out = ehpower(&[
        "simulate", "--policy", "greedy", "--dist", "bernoulli:p=1", "--bbar", "3", "--gamma",
        "1", "--horizon", "100", "--runs", "1", "--seed", "7",
    ]);
    let row = read_simulate_csv(&stdout(&out)).unwrap();
    assert_eq!(row.mean, 1.0);
    assert_eq!(row.std_error, 0.0);
    assert_eq!(row.horizon, 100);
    assert_eq!(row.runs, 1);
}

#[test]
fn solve_then_replay_through_tabular_policy() {
    let solution_path = tmp_path("solution.csv");
    let out = ehpower(&[
        "solve", "--dist", "bernoulli:p=0.5", "--bbar", "1", "--gamma", "1", "--grid", "256",
        "--out", solution_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&solution_path).unwrap();
    let solution = ehpower::mdp::MdpSolution::read(text.as_bytes()).unwrap();
    // closed form optimum is 0.5 * 0.5*log2(2) = 0.25
    assert!(
        (solution.gain - 0.25).abs() < 5e-3,
        "gain {} too far from 0.25",
        solution.gain
    );

    let policy = format!("tabular:{}", solution_path.display());
    let out = ehpower(&[
        "simulate", "--policy", &policy, "--dist", "bernoulli:p=0.5", "--bbar", "1", "--gamma",
        "1", "--horizon", "100000", "--runs", "8", "--seed", "3",
    ]);
    let row = read_simulate_csv(&stdout(&out)).unwrap();
    assert!(
        (row.mean - solution.gain).abs() <= 3.0 * row.std_error + 0.02,
        "replayed mean {} vs gain {}",
        row.mean,
        solution.gain
    );
    std::fs::remove_file(&solution_path).ok();
}

#[test]
fn simulate_accepts_an_initial_battery_level() {
    // starting empty under sure arrivals loses exactly the first slot
    let out = ehpower(&[
        "simulate", "--policy", "greedy", "--dist", "bernoulli:p=1", "--bbar", "3", "--gamma",
        "1", "--horizon", "100", "--runs", "1", "--initial-battery", "0",
    ]);
    let row = read_simulate_csv(&stdout(&out)).unwrap();
    assert_eq!(row.mean, 0.99);

    let out = ehpower(&[
        "simulate", "--policy", "greedy", "--dist", "bernoulli:p=1", "--bbar", "3", "--gamma",
        "1", "--horizon", "100", "--runs", "1", "--initial-battery", "7",
    ]);
    assert!(!out.status.success(), "initial battery above capacity must fail");
}

#[test]
fn sweep_runs_from_a_config_file() {
    let config_path = tmp_path("sweep.json");
    let spec = ehpower_cli::sweep::SweepSpec {
        family: ehpower_cli::family::ModelFamily::Bernoulli { p: 0.5 },
        bbar_grid: vec![1.0, 10.0],
        gamma: 1.0,
        policies: vec![
            ehpower_cli::family::PolicyKind::FixedFraction { q: None },
            ehpower_cli::family::PolicyKind::Greedy,
        ],
        sim: ehpower_cli::sweep::SimSettings {
            horizon: 10_000,
            runs: 4,
            seed: 5,
        },
        include_mdp_optimal: false,
        mdp: None,
    };
    std::fs::write(&config_path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();

    let out = ehpower(&["sweep", "--config", config_path.to_str().unwrap()]);
    let rows = read_sweep_csv(&stdout(&out)).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.error.is_none()));

    // same sweep as JSON
    let out = ehpower(&[
        "sweep", "--config", config_path.to_str().unwrap(), "--format", "json",
    ]);
    let json_rows: Vec<SweepRow> = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(rows, json_rows);

    // seed override changes the draw
    let out = ehpower(&[
        "sweep", "--config", config_path.to_str().unwrap(), "--seed", "99",
    ]);
    let reseeded = read_sweep_csv(&stdout(&out)).unwrap();
    assert_ne!(rows[0].throughput, reseeded[0].throughput);
    std::fs::remove_file(&config_path).ok();
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let out = ehpower(&["bounds", "--dist", "gauss:mean=1", "--bbar", "1", "--gamma", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown distribution"));

    let out = ehpower(&["simulate", "--no-such-flag"]);
    assert!(!out.status.success());

    let out = ehpower(&["sweep", "--preset", "fig99"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));

    let out = ehpower(&["sweep"]);
    assert!(!out.status.success());
}
