//! Report rows and their CSV/JSON encodings.
//!
//! CSV is the stable contract: a header line followed by one row per record,
//! empty cells for undefined values. Numbers are printed with Rust's shortest
//! round-trip float formatting, so parsing a file back yields the exact same
//! values.

use anyhow::Context;
use serde::{Deserialize, Serialize};

use ehpower::analytic::BoundsReport;
use ehpower::sim::ThroughputEstimate;

/// One `bounds` invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub mu: f64,
    pub upper: f64,
    pub ff_additive_lower: f64,
    pub ff_multiplicative_lower: f64,
    pub ff_bernoulli_exact: Option<f64>,
    pub bernoulli_optimal: Option<f64>,
    pub greedy_bernoulli: Option<f64>,
}

impl From<BoundsReport> for BoundsRow {
    fn from(r: BoundsReport) -> Self {
        BoundsRow {
            mu: r.mu,
            upper: r.upper,
            ff_additive_lower: r.ff_additive_lower,
            ff_multiplicative_lower: r.ff_multiplicative_lower,
            ff_bernoulli_exact: r.ff_bernoulli_exact,
            bernoulli_optimal: r.bernoulli_optimal,
            greedy_bernoulli: r.greedy_bernoulli,
        }
    }
}

/// One `simulate` invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRow {
    pub mean: f64,
    pub std_error: f64,
    pub horizon: u64,
    pub runs: u64,
    pub mean_battery: f64,
    pub energy_wasted_frac: f64,
}

impl From<ThroughputEstimate> for SimulateRow {
    fn from(e: ThroughputEstimate) -> Self {
        SimulateRow {
            mean: e.mean,
            std_error: e.std_error,
            horizon: e.horizon,
            runs: e.runs,
            mean_battery: e.mean_battery,
            energy_wasted_frac: e.energy_wasted_frac,
        }
    }
}

/// One `(bbar, policy)` point of a sweep. On a per-point failure the `error`
/// column carries the message and the affected numeric cells are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub bbar: f64,
    pub policy: String,
    pub throughput: Option<f64>,
    pub std_error: Option<f64>,
    pub theta_optimal: Option<f64>,
    pub upper_bound: Option<f64>,
    pub additive_gap: Option<f64>,
    pub ratio: Option<f64>,
    pub error: Option<String>,
}

pub const BOUNDS_HEADER: &str = "mu,upper,ff_additive_lower,ff_multiplicative_lower,ff_bernoulli_exact,bernoulli_optimal,greedy_bernoulli";
pub const SIMULATE_HEADER: &str = "mean,std_error,horizon,runs,mean_battery,energy_wasted_frac";
pub const SWEEP_HEADER: &str =
    "bbar,policy,throughput,std_error,theta_optimal,upper_bound,additive_gap,ratio,error";

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn bounds_csv(row: &BoundsRow) -> String {
    format!(
        "{}\n{},{},{},{},{},{},{}\n",
        BOUNDS_HEADER,
        row.mu,
        row.upper,
        row.ff_additive_lower,
        row.ff_multiplicative_lower,
        opt(row.ff_bernoulli_exact),
        opt(row.bernoulli_optimal),
        opt(row.greedy_bernoulli),
    )
}

pub fn simulate_csv(row: &SimulateRow) -> String {
    format!(
        "{}\n{},{},{},{},{},{}\n",
        SIMULATE_HEADER,
        row.mean,
        row.std_error,
        row.horizon,
        row.runs,
        row.mean_battery,
        row.energy_wasted_frac,
    )
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.bbar,
            r.policy,
            opt(r.throughput),
            opt(r.std_error),
            opt(r.theta_optimal),
            opt(r.upper_bound),
            opt(r.additive_gap),
            opt(r.ratio),
            r.error.as_deref().unwrap_or(""),
        ));
    }
    out
}

fn parse_opt(cell: &str) -> anyhow::Result<Option<f64>> {
    if cell.is_empty() {
        Ok(None)
    } else {
        Ok(Some(cell.parse::<f64>()?))
    }
}

/// Parse sweep CSV produced by [`sweep_csv`].
pub fn read_sweep_csv(text: &str) -> anyhow::Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    let header = lines.next().context("empty sweep file")?;
    anyhow::ensure!(
        header == SWEEP_HEADER,
        "unexpected sweep header `{header}`"
    );
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        anyhow::ensure!(cells.len() == 9, "bad sweep row `{line}`");
        rows.push(SweepRow {
            bbar: cells[0].parse().context("bbar")?,
            policy: cells[1].to_string(),
            throughput: parse_opt(cells[2])?,
            std_error: parse_opt(cells[3])?,
            theta_optimal: parse_opt(cells[4])?,
            upper_bound: parse_opt(cells[5])?,
            additive_gap: parse_opt(cells[6])?,
            ratio: parse_opt(cells[7])?,
            error: (!cells[8].is_empty()).then(|| cells[8].to_string()),
        });
    }
    Ok(rows)
}

/// Parse bounds CSV produced by [`bounds_csv`].
pub fn read_bounds_csv(text: &str) -> anyhow::Result<BoundsRow> {
    let mut lines = text.lines();
    let header = lines.next().context("empty bounds file")?;
    anyhow::ensure!(header == BOUNDS_HEADER, "unexpected bounds header");
    let line = lines.next().context("missing bounds row")?;
    let cells: Vec<&str> = line.split(',').collect();
    anyhow::ensure!(cells.len() == 7, "bad bounds row `{line}`");
    Ok(BoundsRow {
        mu: cells[0].parse()?,
        upper: cells[1].parse()?,
        ff_additive_lower: cells[2].parse()?,
        ff_multiplicative_lower: cells[3].parse()?,
        ff_bernoulli_exact: parse_opt(cells[4])?,
        bernoulli_optimal: parse_opt(cells[5])?,
        greedy_bernoulli: parse_opt(cells[6])?,
    })
}

/// Parse simulate CSV produced by [`simulate_csv`].
pub fn read_simulate_csv(text: &str) -> anyhow::Result<SimulateRow> {
    let mut lines = text.lines();
    let header = lines.next().context("empty simulate file")?;
    anyhow::ensure!(header == SIMULATE_HEADER, "unexpected simulate header");
    let line = lines.next().context("missing simulate row")?;
    let cells: Vec<&str> = line.split(',').collect();
    anyhow::ensure!(cells.len() == 6, "bad simulate row `{line}`");
    Ok(SimulateRow {
        mean: cells[0].parse()?,
        std_error: cells[1].parse()?,
        horizon: cells[2].parse()?,
        runs: cells[3].parse()?,
        mean_battery: cells[4].parse()?,
        energy_wasted_frac: cells[5].parse()?,
    })
}
