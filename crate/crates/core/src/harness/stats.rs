use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::bench::{BenchTable, Dataset};
use crate::error::{Error, Result};
use crate::genotype::{Genotype, Operation};
use crate::hwcost::{Constraint, CostModel};

/// Mean number of edges carrying each operation over a set of architectures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpDistribution {
    pub none: f64,
    pub skip_connect: f64,
    pub nor_conv_1x1: f64,
    pub nor_conv_3x3: f64,
    pub avg_pool_3x3: f64,
}

impl OpDistribution {
    pub fn get(&self, op: Operation) -> f64 {
        match op {
            Operation::None => self.none,
            Operation::SkipConnect => self.skip_connect,
            Operation::NorConv1x1 => self.nor_conv_1x1,
            Operation::NorConv3x3 => self.nor_conv_3x3,
            Operation::AvgPool3x3 => self.avg_pool_3x3,
        }
    }

    pub fn total(&self) -> f64 {
        Operation::ALL.iter().map(|&op| self.get(op)).sum()
    }
}

pub fn op_distribution(archs: &[Genotype]) -> Result<OpDistribution> {
    if archs.is_empty() {
        return Err(Error::Argument("operation distribution of an empty set".into()));
    }
    let mut counts = [0usize; Operation::COUNT];
    for g in archs {
        for op in g.genes() {
            counts[op.code() as usize] += 1;
        }
    }
    let n = archs.len() as f64;
    let mean = |op: Operation| counts[op.code() as usize] as f64 / n;
    Ok(OpDistribution {
        none: mean(Operation::None),
        skip_connect: mean(Operation::SkipConnect),
        nor_conv_1x1: mean(Operation::NorConv1x1),
        nor_conv_3x3: mean(Operation::NorConv3x3),
        avg_pool_3x3: mean(Operation::AvgPool3x3),
    })
}

/// A table row that satisfies a constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedArch {
    pub arch: Genotype,
    pub accuracy: f64,
    pub cost: f64,
}

fn by_accuracy(a: &RankedArch, b: &RankedArch) -> Ordering {
    b.accuracy
        .total_cmp(&a.accuracy)
        .then_with(|| a.arch.to_arch_str().cmp(&b.arch.to_arch_str()))
}

/// Every row with `cost ≤ Ω`, sorted by decreasing accuracy (ties by architecture string).
pub fn feasible_ranking(table: &BenchTable, constraint: &Constraint, dataset: Dataset) -> Result<Vec<RankedArch>> {
    let mut out = Vec::new();
    for (g, row) in table.iter() {
        let cost = table.cost(&g, constraint.query())?.value;
        if constraint.admits(cost) {
            out.push(RankedArch {
                arch: g,
                accuracy: row.accuracy(dataset),
                cost,
            });
        }
    }
    out.sort_by(by_accuracy);
    Ok(out)
}

/// One-based rank of `accuracy` among `ranking`: one plus the number of strictly better rows.
pub fn rank_of(ranking: &[RankedArch], accuracy: f64) -> usize {
    1 + ranking.iter().take_while(|r| r.accuracy > accuracy).count()
}

/// Fraction of the table admitted by `constraint`.
pub fn feasible_fraction(table: &BenchTable, constraint: &Constraint) -> Result<f64> {
    let mut admitted = 0usize;
    for (g, _) in table.iter() {
        if constraint.admits(table.cost(&g, constraint.query())?.value) {
            admitted += 1;
        }
    }
    Ok(admitted as f64 / table.len().max(1) as f64)
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
