//! Hardware cost: analytic MACs, per-device latency lookup, the constraint penalty,
//! and the rejection-sampling baseline.

use std::fmt;
use std::str::FromStr;

use num_traits::Num;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{random_genotype, Genotype, Operation};
use crate::harness::bench::BenchTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceId {
    EdgeGpu,
    Raspi4,
    EdgeTpu,
    Pixel3,
    Eyeriss,
    Fpga,
}

impl DeviceId {
    pub const ALL: [DeviceId; 6] = [
        DeviceId::EdgeGpu,
        DeviceId::Raspi4,
        DeviceId::EdgeTpu,
        DeviceId::Pixel3,
        DeviceId::Eyeriss,
        DeviceId::Fpga,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DeviceId::EdgeGpu => "edgegpu",
            DeviceId::Raspi4 => "raspi4",
            DeviceId::EdgeTpu => "edgetpu",
            DeviceId::Pixel3 => "pixel3",
            DeviceId::Eyeriss => "eyeriss",
            DeviceId::Fpga => "fpga",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DeviceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DeviceId::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown device `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CostUnit {
    /// Millions of multiply-accumulates.
    MegaMacs,
    Milliseconds,
}

impl fmt::Display for CostUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostUnit::MegaMacs => "M MACs",
            CostUnit::Milliseconds => "ms",
        })
    }
}

/// Which hardware cost to measure. Latency always names its device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "metric", content = "device")]
pub enum CostQuery {
    Macs,
    Latency(DeviceId),
}

impl CostQuery {
    pub fn unit(self) -> CostUnit {
        match self {
            CostQuery::Macs => CostUnit::MegaMacs,
            CostQuery::Latency(_) => CostUnit::Milliseconds,
        }
    }
}

impl fmt::Display for CostQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostQuery::Macs => f.write_str("macs"),
            CostQuery::Latency(d) => write!(f, "latency@{d}"),
        }
    }
}

/// A cost value tagged with its unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cost<T = f64> {
    pub value: T,
    pub unit: CostUnit,
}

impl<T> Cost<T> {
    pub fn new(value: T, unit: CostUnit) -> Self {
        Self { value, unit }
    }
}

/// Upper bound `Ω` on one hardware cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint<T = f64> {
    omega: T,
    query: CostQuery,
}

impl<T: Num + PartialOrd + Copy + fmt::Display> Constraint<T> {
    pub fn new(omega: T, query: CostQuery) -> Result<Self> {
        if !(omega > T::zero()) {
            return Err(Error::Argument(format!(
                "constraint threshold {omega} must be positive"
            )));
        }
        Ok(Self { omega, query })
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    pub fn query(&self) -> CostQuery {
        self.query
    }

    pub fn admits(&self, cost: T) -> bool {
        cost <= self.omega
    }
}

// JSON has no infinity; an unbounded threshold is written as the string "inf".
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Threshold {
    Finite(f64),
    Named(String),
}

#[derive(Serialize, Deserialize)]
struct ConstraintRepr {
    omega: Threshold,
    query: CostQuery,
}

impl Serialize for Constraint<f64> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let omega = if self.omega.is_infinite() {
            Threshold::Named("inf".into())
        } else {
            Threshold::Finite(self.omega)
        };
        ConstraintRepr {
            omega,
            query: self.query,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Constraint<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = ConstraintRepr::deserialize(deserializer)?;
        let omega = match repr.omega {
            Threshold::Finite(v) => v,
            Threshold::Named(s) if s == "inf" => f64::INFINITY,
            Threshold::Named(s) => return Err(serde::de::Error::custom(format!("bad threshold `{s}`"))),
        };
        Constraint::new(omega, repr.query).map_err(serde::de::Error::custom)
    }
}

/// `0` when `cost ≤ omega`, otherwise `omega − cost`.
pub fn penalty_value<T: Num + PartialOrd + Copy>(cost: T, omega: T) -> T {
    if cost <= omega {
        T::zero()
    } else {
        omega - cost
    }
}

/// Penalty of a tagged cost under `constraint`; rejects unit mismatches and negative costs.
pub fn penalty<T: Num + PartialOrd + Copy + fmt::Display>(cost: Cost<T>, constraint: &Constraint<T>) -> Result<T> {
    if cost.unit != constraint.query.unit() {
        return Err(Error::Argument(format!(
            "cost in {} compared against a {} constraint",
            cost.unit,
            constraint.query.unit()
        )));
    }
    if !(cost.value >= T::zero()) {
        return Err(Error::Argument(format!("cost {} must be non-negative", cost.value)));
    }
    Ok(penalty_value(cost.value, constraint.omega))
}

/// Macro structure that turns a cell into a network: a 3×3 stem convolution,
/// three stages of `cells_per_stage` cells with channels doubling and resolution
/// halving per stage, then a linear classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacroSkeleton {
    pub height: usize,
    pub width: usize,
    pub input_channels: usize,
    pub stage_channels: Vec<usize>,
    pub cells_per_stage: usize,
    pub classes: usize,
}

impl Default for MacroSkeleton {
    fn default() -> Self {
        Self {
            height: 32,
            width: 32,
            input_channels: 3,
            stage_channels: vec![16, 32, 64],
            cells_per_stage: 5,
            classes: 10,
        }
    }
}

impl MacroSkeleton {
    fn stage_resolution(&self, stage: usize) -> (usize, usize) {
        ((self.height >> stage).max(1), (self.width >> stage).max(1))
    }

    /// Stem and classifier MACs (absolute count).
    pub fn fixed_macs(&self) -> u64 {
        let c0 = self.stage_channels.first().copied().unwrap_or(0) as u64;
        let last = self.stage_channels.last().copied().unwrap_or(0) as u64;
        let stem = 9 * self.input_channels as u64 * c0 * (self.height * self.width) as u64;
        stem + last * self.classes as u64
    }

    /// MACs of one edge carrying `op`, summed over every cell instance.
    pub fn edge_macs(&self, op: Operation) -> u64 {
        let kernel = match op {
            Operation::NorConv3x3 => 9,
            Operation::NorConv1x1 => 1,
            _ => return 0,
        };
        self.stage_channels
            .iter()
            .enumerate()
            .map(|(stage, &c)| {
                let (h, w) = self.stage_resolution(stage);
                kernel * (c * c * h * w) as u64 * self.cells_per_stage as u64
            })
            .sum()
    }

    pub fn macs(&self, g: &Genotype) -> u64 {
        self.fixed_macs() + g.genes().iter().map(|&op| self.edge_macs(op)).sum::<u64>()
    }
}

/// Analytic MACs of `g` under `skel`, in millions.
pub fn macs_estimate(g: &Genotype, skel: &MacroSkeleton) -> f64 {
    skel.macs(g) as f64 / 1e6
}

/// Stored latency of `g` on `device`, in milliseconds.
pub fn latency_lookup(table: &BenchTable, g: &Genotype, device: DeviceId) -> Result<f64> {
    table.row(g)?.latency(device).ok_or_else(|| Error::Lookup {
        arch: g.to_arch_str(),
        what: format!("no latency recorded for {device}"),
    })
}

/// Source of hardware costs for a query.
pub trait CostModel: Sync {
    fn cost(&self, g: &Genotype, query: CostQuery) -> Result<Cost>;
}

impl CostModel for MacroSkeleton {
    fn cost(&self, g: &Genotype, query: CostQuery) -> Result<Cost> {
        match query {
            CostQuery::Macs => Ok(Cost::new(macs_estimate(g, self), CostUnit::MegaMacs)),
            CostQuery::Latency(device) => Err(Error::Lookup {
                arch: g.to_arch_str(),
                what: format!("analytic model has no latency for {device}"),
            }),
        }
    }
}

impl CostModel for BenchTable {
    fn cost(&self, g: &Genotype, query: CostQuery) -> Result<Cost> {
        match query {
            CostQuery::Macs => Ok(Cost::new(self.row(g)?.macs_m, CostUnit::MegaMacs)),
            CostQuery::Latency(device) => Ok(Cost::new(latency_lookup(self, g, device)?, CostUnit::Milliseconds)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionSample {
    pub population: Vec<Genotype>,
    pub draws: usize,
}

/// Draws uniform genotypes, keeping only feasible ones, until `size` are kept.
///
/// Fails with [`Error::Halting`] once `max_attempts` draws are spent.
pub fn rejection_sample_population<R, F>(
    constraint: &Constraint,
    mut cost_fn: F,
    size: usize,
    rng: &mut R,
    max_attempts: usize,
) -> Result<RejectionSample>
where
    R: Rng + ?Sized,
    F: FnMut(&Genotype) -> Result<Cost>,
{
    if size == 0 {
        return Err(Error::Argument("population size must be at least 1".into()));
    }
    if max_attempts < size {
        return Err(Error::Argument(format!(
            "max_attempts {max_attempts} is smaller than the population size {size}"
        )));
    }
    let mut population = Vec::with_capacity(size);
    let mut draws = 0;
    while population.len() < size {
        if draws == max_attempts {
            return Err(Error::Halting {
                attempts: draws,
                kept: population.len(),
            });
        }
        let g = random_genotype(rng);
        draws += 1;
        if penalty(cost_fn(&g)?, constraint)? == 0.0 {
            population.push(g);
        }
    }
    Ok(RejectionSample { population, draws })
}

/// Default draw budget for rejection sampling.
pub const DEFAULT_MAX_ATTEMPTS: usize = 1_000_000;
