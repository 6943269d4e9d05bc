//! Experiment runner for energy-harvesting power control.
//!
//! Subcommands: `bounds` (closed-form bound report), `simulate` (Monte Carlo
//! throughput), `solve` (value-iteration solution file) and `sweep`
//! (policy-vs-optimum tables over a capacity grid).

use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use ehpower::analytic::bounds_report;
use ehpower::dist::{parse_energy_model, SystemParams};
use ehpower::mdp::{solve, MdpConfig};
use ehpower::sim::{run, SimConfig};

use ehpower_cli::family::parse_policy_kind;
use ehpower_cli::report::{
    bounds_csv, simulate_csv, sweep_csv, BoundsRow, SimulateRow,
};
use ehpower_cli::sweep::{preset, run_sweep, SweepSpec, PRESET_NAMES};

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Parser)]
#[command(name = "ehpower", version, about = "Power-control experiments for an energy-harvesting transmitter")]
struct Cli {
    /// Seed for all random streams.
    #[arg(long, global = true, default_value_t = 1234)]
    seed: u64,
    /// Output path (standard output by default).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report encoding. `solve` always writes its own flat solution format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form throughput bounds for an arrival model.
    Bounds {
        /// Arrival model, e.g. `bernoulli:p=0.1`, `uniform:lo=0,hi=10`,
        /// `exp:mean=1`, `discrete:v=0|1,p=0.5|0.5`.
        #[arg(long)]
        dist: String,
        /// Battery capacity.
        #[arg(long)]
        bbar: f64,
        /// Channel SNR coefficient.
        #[arg(long)]
        gamma: f64,
    },
    /// Monte Carlo throughput of a policy.
    Simulate {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        bbar: f64,
        #[arg(long)]
        gamma: f64,
        /// Policy: `ff`, `ff:q=0.2`, `greedy`, `const`, `bopt`,
        /// `tabular:<path>`.
        #[arg(long)]
        policy: String,
        /// Slots per trajectory.
        #[arg(long)]
        horizon: u64,
        /// Independent trajectories.
        #[arg(long)]
        runs: u64,
        /// Initial battery level (full if omitted).
        #[arg(long)]
        initial_battery: Option<f64>,
    },
    /// Solve the average-reward problem and write the solution file.
    Solve {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        bbar: f64,
        #[arg(long)]
        gamma: f64,
        /// Battery grid size.
        #[arg(long, default_value_t = 512)]
        grid: usize,
        /// Actions per state.
        #[arg(long, default_value_t = 256)]
        actions: usize,
        /// Arrival quantization atoms.
        #[arg(long, default_value_t = 64)]
        atoms: usize,
        #[arg(long, default_value_t = 1e-7)]
        span_tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iters: usize,
    },
    /// Evaluate policies over a capacity grid.
    Sweep {
        /// Built-in preset: fig3, fig4, fig5, fig6 or fig7.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// JSON sweep description (mirrors the preset structure).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn output(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> anyhow::Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Bounds { dist, bbar, gamma } => {
            let params = SystemParams::new(bbar, gamma)?;
            let model = parse_energy_model(&dist, bbar)?;
            let row = BoundsRow::from(bounds_report(&model, &params)?);
            let text = match cli.format {
                Format::Csv => bounds_csv(&row),
                Format::Json => to_json(&row)?,
            };
            output(&cli.out, &text)
        }
        Command::Simulate {
            dist,
            bbar,
            gamma,
            policy,
            horizon,
            runs,
            initial_battery,
        } => {
            let params = SystemParams::new(bbar, gamma)?;
            let model = parse_energy_model(&dist, bbar)?;
            let spec = parse_policy_kind(&policy)?.build(&model, &params)?;
            let mut cfg = SimConfig::new(horizon, runs, cli.seed);
            cfg.initial_battery = initial_battery;
            let row = SimulateRow::from(run(&spec, &model, &params, &cfg)?);
            let text = match cli.format {
                Format::Csv => simulate_csv(&row),
                Format::Json => to_json(&row)?,
            };
            output(&cli.out, &text)
        }
        Command::Solve {
            dist,
            bbar,
            gamma,
            grid,
            actions,
            atoms,
            span_tol,
            max_iters,
        } => {
            let params = SystemParams::new(bbar, gamma)?;
            let model = parse_energy_model(&dist, bbar)?;
            let cfg = MdpConfig {
                n_states: grid,
                n_actions: actions,
                arrival_atoms: atoms,
                span_tol,
                max_iters,
            };
            let solution = solve(&model, &params, &cfg)?;
            eprintln!(
                "gain {} bits/slot after {} sweeps (span {:.3e})",
                solution.gain, solution.iters_used, solution.final_span
            );
            let mut buf = Vec::new();
            solution.write(&mut buf)?;
            output(&cli.out, std::str::from_utf8(&buf)?)
        }
        Command::Sweep {
            preset: preset_name,
            config,
        } => {
            let mut spec: SweepSpec = match (preset_name, config) {
                (Some(name), None) => preset(&name).with_context(|| {
                    format!("unknown preset `{name}` (expected one of {PRESET_NAMES:?})")
                })?,
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str(&text)
                        .with_context(|| format!("parsing {}", path.display()))?
                }
                _ => anyhow::bail!("pass exactly one of --preset or --config"),
            };
            if cli.seed != 1234 {
                spec.sim.seed = cli.seed;
            }
            let rows = run_sweep(&spec)?;
            let text = match cli.format {
                Format::Csv => sweep_csv(&rows),
                Format::Json => to_json(&rows)?,
            };
            output(&cli.out, &text)
        }
    }
}
