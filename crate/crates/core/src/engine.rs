//! Generational genetic search with a penalised fitness.
//!
//! Each individual is scored as `fitness = φ + ψ`, where `φ` is the performance
//! estimate (trained-surrogate similarity or rescaled tabular accuracy) and `ψ` the
//! hardware penalty, `0` when the cost is within the threshold and `Ω − cost`
//! otherwise. Infeasible architectures are never rejected; the penalty steers the
//! population instead, so the number of sampled genotypes does not depend on `Ω`.

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{tabular_accuracy, train_single_batch, SurrogateNet, SurrogateTask};
use crate::genotype::{crossover, mutate, random_genotype, Genotype};
use crate::harness::bench::{BenchTable, Dataset};
use crate::hwcost::{penalty, Constraint, Cost, CostModel, CostQuery, MacroSkeleton};
use crate::seed;

const GA_STREAM: u64 = 0x6A00_0001;
const SURROGATE_STREAM: u64 = 0x5A00_0002;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "rmi")]
    RmiSurrogate,
    #[serde(rename = "tabular")]
    TabularAccuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub generations: usize,
    pub population: usize,
    pub train_epochs: usize,
    pub beta: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub tournament: usize,
    pub constraint: Constraint,
    pub estimator: EstimatorKind,
    /// Dataset used by the tabular estimator and for reporting.
    pub dataset: Dataset,
    pub seed: u64,
    /// Surrogate gradient step.
    pub step: f64,
    /// Surrogate batch rows.
    pub batch_rows: usize,
    /// Surrogate feature width.
    pub width: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            generations: 100,
            population: 20,
            train_epochs: 100,
            beta: 0.8,
            mutation_rate: 1.0 / 6.0,
            elitism: 1,
            tournament: 2,
            constraint: Constraint::new(f64::INFINITY, CostQuery::Macs).expect("infinite threshold is positive"),
            estimator: EstimatorKind::RmiSurrogate,
            dataset: Dataset::Cifar10,
            seed: 0,
            step: 1e-2,
            batch_rows: 32,
            width: 16,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.population < 2 {
            return fail(format!("population {} must be at least 2", self.population));
        }
        if self.elitism >= self.population {
            return fail(format!(
                "elitism {} must be smaller than the population {}",
                self.elitism, self.population
            ));
        }
        if self.tournament == 0 {
            return fail("tournament size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return fail(format!("mutation rate {} outside [0, 1]", self.mutation_rate));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return fail(format!("beta {} outside [0, 1]", self.beta));
        }
        if self.estimator == EstimatorKind::RmiSurrogate {
            if !(self.step > 0.0 && self.step.is_finite()) {
                return fail(format!("step {} must be positive", self.step));
            }
            if self.batch_rows == 0 || self.width == 0 {
                return fail("surrogate batch rows and width must be positive".into());
            }
        }
        Ok(())
    }

    /// Offspring created per generation.
    pub fn offspring(&self) -> usize {
        self.population - self.elitism
    }
}

/// Everything fitness evaluation needs besides the genotype.
pub struct SearchContext<'a> {
    table: Option<&'a BenchTable>,
    skeleton: MacroSkeleton,
    surrogate: Option<SurrogateTask<f64>>,
}

impl<'a> SearchContext<'a> {
    pub fn new(cfg: &SearchConfig, table: Option<&'a BenchTable>) -> Result<Self> {
        cfg.validate()?;
        if cfg.estimator == EstimatorKind::TabularAccuracy && table.is_none() {
            return Err(Error::Config("the tabular estimator needs a benchmark table".into()));
        }
        if matches!(cfg.constraint.query(), CostQuery::Latency(_)) && table.is_none() {
            return Err(Error::Config("latency constraints need a benchmark table".into()));
        }
        let surrogate = match cfg.estimator {
            EstimatorKind::RmiSurrogate => Some(SurrogateTask::synthetic(cfg.batch_rows, cfg.width, cfg.seed)?),
            EstimatorKind::TabularAccuracy => None,
        };
        Ok(Self {
            table,
            skeleton: MacroSkeleton::default(),
            surrogate,
        })
    }

    pub fn with_skeleton(mut self, skeleton: MacroSkeleton) -> Self {
        self.skeleton = skeleton;
        self
    }

    pub fn table(&self) -> Option<&'a BenchTable> {
        self.table
    }

    pub fn surrogate(&self) -> Option<&SurrogateTask<f64>> {
        self.surrogate.as_ref()
    }

    pub fn cost(&self, g: &Genotype, query: CostQuery) -> Result<Cost> {
        match self.table {
            Some(table) => table.cost(g, query),
            None => self.skeleton.cost(g, query),
        }
    }
}

/// Evaluation of one individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessRecord {
    pub genotype: Genotype,
    pub phi: f64,
    pub cost: Cost,
    pub psi: f64,
    pub fitness: f64,
}

impl FitnessRecord {
    pub fn is_feasible(&self) -> bool {
        self.psi == 0.0
    }
}

/// Total order used for selection, elitism and best tracking: higher fitness first,
/// then feasible before infeasible, then the lexicographically smaller architecture string.
pub fn rank(a: &FitnessRecord, b: &FitnessRecord) -> Ordering {
    b.fitness
        .total_cmp(&a.fitness)
        .then_with(|| b.is_feasible().cmp(&a.is_feasible()))
        .then_with(|| a.genotype.to_arch_str().cmp(&b.genotype.to_arch_str()))
}

fn surrogate_phi(g: &Genotype, cfg: &SearchConfig, task: &SurrogateTask<f64>) -> Result<f64> {
    let net_seed = seed::derive(cfg.seed, &[SURROGATE_STREAM, g.index() as u64]);
    let net = SurrogateNet::from_genotype(g, cfg.width, cfg.width, net_seed)?;
    let settings = task.settings(cfg.train_epochs, cfg.beta, cfg.step);
    Ok(train_single_batch(net, &task.reference, &settings)?.phi)
}

/// Scores `g`; a pure function of `(g, cfg, ctx)`.
pub fn evaluate_fitness(g: &Genotype, cfg: &SearchConfig, ctx: &SearchContext<'_>) -> Result<FitnessRecord> {
    let inner = || -> Result<FitnessRecord> {
        let phi = match cfg.estimator {
            EstimatorKind::RmiSurrogate => {
                let task = ctx
                    .surrogate
                    .as_ref()
                    .ok_or_else(|| Error::Config("context was built without a surrogate task".into()))?;
                surrogate_phi(g, cfg, task)?
            }
            EstimatorKind::TabularAccuracy => {
                let table = ctx
                    .table
                    .ok_or_else(|| Error::Config("the tabular estimator needs a benchmark table".into()))?;
                tabular_accuracy(table, g, cfg.dataset)? / 100.0
            }
        };
        let cost = ctx.cost(g, cfg.constraint.query())?;
        let psi = penalty(cost, &cfg.constraint)?;
        Ok(FitnessRecord {
            genotype: *g,
            phi,
            cost,
            psi,
            fitness: phi + psi,
        })
    };
    inner().map_err(|e| Error::Evaluation {
        arch: g.to_arch_str(),
        source: Box::new(e),
    })
}

/// `cfg.population` uniform genotypes; duplicates allowed, no feasibility filtering.
pub fn init_population<R: Rng + ?Sized>(cfg: &SearchConfig, rng: &mut R) -> Vec<Genotype> {
    (0..cfg.population).map(|_| random_genotype(rng)).collect()
}

fn tournament<'p, R: Rng + ?Sized>(pop: &'p [FitnessRecord], size: usize, rng: &mut R) -> &'p FitnessRecord {
    let mut best = &pop[rng.random_range(0..pop.len())];
    for _ in 1..size {
        let challenger = &pop[rng.random_range(0..pop.len())];
        if rank(challenger, best) == Ordering::Less {
            best = challenger;
        }
    }
    best
}

/// Next population: the top `elitism` individuals unchanged, the rest bred by
/// tournament selection, uniform crossover and mutation.
pub fn evolve_generation<R: Rng + ?Sized>(
    pop: &[FitnessRecord],
    cfg: &SearchConfig,
    rng: &mut R,
) -> Result<Vec<Genotype>> {
    if pop.is_empty() {
        return Err(Error::Argument("cannot evolve an empty population".into()));
    }
    let mut order: Vec<&FitnessRecord> = pop.iter().collect();
    order.sort_by(|a, b| rank(a, b));
    let mut next: Vec<Genotype> = order.iter().take(cfg.elitism).map(|r| r.genotype).collect();
    while next.len() < cfg.population {
        let a = tournament(pop, cfg.tournament, rng);
        let b = tournament(pop, cfg.tournament, rng);
        let child = crossover(&a.genotype, &b.genotype, rng);
        next.push(mutate(&child, cfg.mutation_rate, rng)?);
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: FitnessRecord,
    pub mean_fitness: f64,
    /// Fitness evaluations requested so far (one per individual per generation).
    pub evaluations: usize,
    /// Distinct genotypes evaluated so far.
    pub unique_evaluations: usize,
    /// Genotypes sampled so far: initial draws plus offspring.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHistory {
    pub generations: Vec<GenerationStats>,
}

impl SearchHistory {
    pub fn samples(&self) -> usize {
        self.generations.last().map_or(0, |g| g.samples)
    }

    pub fn best_trace(&self) -> Vec<f64> {
        self.generations.iter().map(|g| g.best.fitness).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// Best feasible individual ever evaluated, or the best overall if none was feasible.
    pub best: FitnessRecord,
    pub history: SearchHistory,
    /// Every distinct evaluation, sorted by [`rank`].
    pub evaluated: Vec<FitnessRecord>,
}

fn evaluate_population(
    pop: &[Genotype],
    cfg: &SearchConfig,
    ctx: &SearchContext<'_>,
    cache: &mut HashMap<Genotype, FitnessRecord>,
) -> Result<Vec<FitnessRecord>> {
    let mut pending: Vec<Genotype> = Vec::new();
    for g in pop {
        if !cache.contains_key(g) && !pending.contains(g) {
            pending.push(*g);
        }
    }
    let fresh: Vec<Result<FitnessRecord>> = pending.par_iter().map(|g| evaluate_fitness(g, cfg, ctx)).collect();
    for rec in fresh {
        let rec = rec?;
        cache.insert(rec.genotype, rec);
    }
    Ok(pop.iter().map(|g| cache[g].clone()).collect())
}

fn keep_better(slot: &mut Option<FitnessRecord>, candidate: &FitnessRecord) {
    if slot.as_ref().is_none_or(|cur| rank(candidate, cur) == Ordering::Less) {
        *slot = Some(candidate.clone());
    }
}

/// Runs the search for `cfg.generations` generations after the initial one.
pub fn run_search(cfg: &SearchConfig, ctx: &SearchContext<'_>) -> Result<SearchOutcome> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed, &[GA_STREAM]);
    let mut pop = init_population(cfg, &mut rng);
    let mut samples = pop.len();
    let mut cache = HashMap::new();
    let mut stats = Vec::with_capacity(cfg.generations + 1);
    let mut best_any: Option<FitnessRecord> = None;
    let mut best_feasible: Option<FitnessRecord> = None;

    for generation in 0..=cfg.generations {
        let records = evaluate_population(&pop, cfg, ctx, &mut cache)?;
        let gen_best = records
            .iter()
            .min_by(|a, b| rank(a, b))
            .expect("population is non-empty")
            .clone();
        for rec in &records {
            keep_better(&mut best_any, rec);
            if rec.is_feasible() {
                keep_better(&mut best_feasible, rec);
            }
        }
        stats.push(GenerationStats {
            generation,
            best: gen_best,
            mean_fitness: records.iter().map(|r| r.fitness).sum::<f64>() / records.len() as f64,
            evaluations: (generation + 1) * cfg.population,
            unique_evaluations: cache.len(),
            samples,
        });
        if generation < cfg.generations {
            pop = evolve_generation(&records, cfg, &mut rng)?;
            samples += cfg.offspring();
        }
    }

    let mut evaluated: Vec<FitnessRecord> = cache.into_values().collect();
    evaluated.sort_by(rank);
    Ok(SearchOutcome {
        best: best_feasible.or(best_any).expect("at least one evaluation"),
        history: SearchHistory { generations: stats },
        evaluated,
    })
}
