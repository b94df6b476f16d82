//! Sample cost of building a feasible population: rejection sampling versus the
//! penalty, which keeps every draw.

use serde::{Deserialize, Serialize};

use crate::engine::{init_population, SearchConfig};
use crate::error::{Error, Result};
use crate::genotype::enumerate_space;
use crate::hwcost::{rejection_sample_population, Constraint, CostModel};
use crate::seed;

const ABLATION_STREAM: u64 = 0xAB1A_7E00;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub constraint: Constraint,
    /// Exact fraction of the whole space admitted by the constraint.
    pub feasible_fraction: f64,
    /// Draw count per completed rejection run.
    pub rejection_draws: Vec<usize>,
    pub rejection_mean: Option<f64>,
    /// Runs that hit the draw budget.
    pub halted_runs: usize,
    pub penalty_samples: usize,
}

/// Exact feasible fraction of the full space under `model`.
pub fn space_feasible_fraction<M: CostModel + ?Sized>(model: &M, constraint: &Constraint) -> Result<f64> {
    let mut admitted = 0usize;
    let mut total = 0usize;
    for g in enumerate_space() {
        total += 1;
        if constraint.admits(model.cost(&g, constraint.query())?.value) {
            admitted += 1;
        }
    }
    Ok(admitted as f64 / total as f64)
}

/// For each constraint: mean draws rejection sampling needs for `size` feasible
/// genotypes over `runs` runs, and the (constant) draws the penalty approach needs.
pub fn rejection_vs_penalty_experiment<M: CostModel + ?Sized>(
    constraints: &[Constraint],
    model: &M,
    size: usize,
    runs: usize,
    max_attempts: usize,
    seed: u64,
) -> Result<Vec<AblationRow>> {
    if runs == 0 {
        return Err(Error::Argument("need at least one run".into()));
    }
    let mut rows = Vec::with_capacity(constraints.len());
    for (ci, constraint) in constraints.iter().enumerate() {
        let mut draws = Vec::with_capacity(runs);
        let mut halted_runs = 0;
        for run in 0..runs {
            let mut rng = seed::rng(seed, &[ABLATION_STREAM, ci as u64, run as u64]);
            match rejection_sample_population(
                constraint,
                |g| model.cost(g, constraint.query()),
                size,
                &mut rng,
                max_attempts,
            ) {
                Ok(sample) => draws.push(sample.draws),
                Err(Error::Halting { .. }) => halted_runs += 1,
                Err(e) => return Err(e),
            }
        }
        let penalty_cfg = SearchConfig {
            population: size.max(2),
            ..SearchConfig::default()
        };
        let mut rng = seed::rng(seed, &[ABLATION_STREAM, ci as u64, u64::MAX]);
        let penalty_samples = init_population(&penalty_cfg, &mut rng).len().min(size);
        let rejection_mean = (!draws.is_empty()).then(|| draws.iter().sum::<usize>() as f64 / draws.len() as f64);
        rows.push(AblationRow {
            constraint: *constraint,
            feasible_fraction: space_feasible_fraction(model, constraint)?,
            rejection_draws: draws,
            rejection_mean,
            halted_runs,
            penalty_samples,
        });
    }
    Ok(rows)
}
