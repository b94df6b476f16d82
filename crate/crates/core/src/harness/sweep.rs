//! Constraint sweeps: many seeded searches per constraint, summarised against the
//! exhaustive constrained optimum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bench::BenchTable;
use super::results::{run_once, RunResult};
use super::stats::{feasible_ranking, mean_std, op_distribution, rank_of, OpDistribution, RankedArch};
use crate::engine::SearchConfig;
use crate::error::{Error, Result};
use crate::hwcost::{Constraint, CostQuery, DeviceId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Macs,
    Latency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub metric: Metric,
    pub omegas: Vec<f64>,
    /// Ignored for MACs.
    pub devices: Vec<DeviceId>,
    pub seeds: Vec<u64>,
}

impl SweepGrid {
    /// Constraints in grid order: device-major, then threshold.
    pub fn constraints(&self) -> Result<Vec<Constraint>> {
        let queries: Vec<CostQuery> = match self.metric {
            Metric::Macs => vec![CostQuery::Macs],
            Metric::Latency => self.devices.iter().map(|&d| CostQuery::Latency(d)).collect(),
        };
        let mut out = Vec::new();
        for q in queries {
            for &omega in &self.omegas {
                out.push(Constraint::new(omega, q)?);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub seed: u64,
    pub error: String,
}

/// Per-constraint summary; accuracies in percent on the template's dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub constraint: Constraint,
    pub runs: usize,
    pub failures: Vec<CellFailure>,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub cost_mean: f64,
    pub cost_std: f64,
    pub feasible_runs: usize,
    /// One-based rank of each run's best in the feasible ranking (infeasible bests omitted).
    pub best_ranks: Vec<usize>,
    pub feasible_count: usize,
    pub oracle: Option<RankedArch>,
    pub discovered_ops: Option<OpDistribution>,
    pub oracle_top10_ops: Option<OpDistribution>,
}

impl CellSummary {
    pub fn failed(&self) -> bool {
        !self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// Successful runs in grid order.
    pub results: Vec<RunResult>,
    pub cells: Vec<CellSummary>,
}

fn summarise(
    constraint: Constraint,
    template: &SearchConfig,
    table: &BenchTable,
    runs: &[RunResult],
    failures: Vec<CellFailure>,
) -> Result<CellSummary> {
    let ranking = feasible_ranking(table, &constraint, template.dataset)?;
    let mut accuracies = Vec::with_capacity(runs.len());
    let mut costs = Vec::with_capacity(runs.len());
    let mut best_ranks = Vec::new();
    for run in runs {
        let acc = table.row(&run.best.genotype)?.accuracy(template.dataset);
        accuracies.push(acc);
        costs.push(run.best.cost.value);
        if run.best.is_feasible() {
            best_ranks.push(rank_of(&ranking, acc));
        }
    }
    let (accuracy_mean, accuracy_std) = mean_std(&accuracies);
    let (cost_mean, cost_std) = mean_std(&costs);
    let discovered: Vec<_> = runs.iter().map(|r| r.best.genotype).collect();
    let top10: Vec<_> = ranking.iter().take(10).map(|r| r.arch).collect();
    Ok(CellSummary {
        constraint,
        runs: runs.len(),
        failures,
        accuracy_mean,
        accuracy_std,
        cost_mean,
        cost_std,
        feasible_runs: best_ranks.len(),
        best_ranks,
        feasible_count: ranking.len(),
        oracle: ranking.first().cloned(),
        discovered_ops: op_distribution(&discovered).ok(),
        oracle_top10_ops: op_distribution(&top10).ok(),
    })
}

/// Runs the template search for every (constraint, seed) pair of `grid`.
///
/// A failing run is recorded in its cell summary; the remaining runs continue.
pub fn run_sweep(grid: &SweepGrid, template: &SearchConfig, table: &BenchTable) -> Result<SweepReport> {
    if grid.omegas.is_empty() || grid.seeds.is_empty() {
        return Err(Error::Argument(
            "sweep grid needs at least one threshold and one seed".into(),
        ));
    }
    if grid.metric == Metric::Latency {
        if grid.devices.is_empty() {
            return Err(Error::Argument("latency sweeps need at least one device".into()));
        }
        if let Some(d) = grid.devices.iter().find(|&&d| !table.has_device(d)) {
            return Err(Error::Argument(format!(
                "benchmark table has no complete latency column for {d}"
            )));
        }
    }
    let constraints = grid.constraints()?;
    let jobs: Vec<(usize, u64)> = (0..constraints.len())
        .flat_map(|c| grid.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let outcomes: Vec<Result<RunResult>> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let cfg = SearchConfig {
                constraint: constraints[c],
                seed,
                ..template.clone()
            };
            run_once(&cfg, Some(table))
        })
        .collect();

    let mut results = Vec::new();
    let mut cells = Vec::with_capacity(constraints.len());
    let mut outcomes = outcomes.into_iter();
    for &constraint in &constraints {
        let mut runs = Vec::new();
        let mut failures = Vec::new();
        for &seed in &grid.seeds {
            match outcomes.next().expect("one outcome per job") {
                Ok(r) => runs.push(r),
                Err(e) => failures.push(CellFailure {
                    seed,
                    error: e.to_string(),
                }),
            }
        }
        cells.push(summarise(constraint, template, table, &runs, failures)?);
        results.extend(runs);
    }
    Ok(SweepReport { results, cells })
}
