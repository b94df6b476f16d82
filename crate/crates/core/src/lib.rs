//! Constraint-aware evolutionary search over the 6-edge, 5-operation cell space.
//!
//! Candidates are scored by a training-light estimate of how closely their feature
//! maps match a reference network, and penalised by how far a hardware cost exceeds a
//! threshold. Numeric kernels are generic over [`Scalar`]; aliases below fix the
//! common precisions.

pub mod engine;
pub mod error;
pub mod estimator;
pub mod genotype;
pub mod harness;
pub mod hwcost;
pub mod scalar;
pub mod seed;

pub use engine::{
    evaluate_fitness, evolve_generation, init_population, run_search, EstimatorKind, FitnessRecord, SearchConfig,
    SearchContext, SearchHistory, SearchOutcome,
};
pub use error::{Error, Result};
pub use estimator::{combined_loss, rmi_score, FeatureStack, SurrogateNet, SurrogateTask};
pub use genotype::{crossover, mutate, parse_arch_str, random_genotype, Genotype, Operation};
pub use harness::{BenchTable, Dataset};
pub use hwcost::{penalty, Constraint, Cost, CostModel, CostQuery, CostUnit, DeviceId, MacroSkeleton};
pub use scalar::Scalar;

/// Exact rational scalar for penalty arithmetic.
pub type Exact = num_rational::Rational64;

pub type FeatureStackF32 = FeatureStack<f32>;
pub type FeatureStackF64 = FeatureStack<f64>;
pub type SurrogateNetF32 = SurrogateNet<f32>;
pub type SurrogateNetF64 = SurrogateNet<f64>;
pub type ExactConstraint = Constraint<Exact>;
pub type ExactCost = Cost<Exact>;
