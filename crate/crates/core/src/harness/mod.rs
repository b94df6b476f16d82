//! Benchmark ingestion, experiment orchestration and result persistence.

pub mod ablation;
pub mod bench;
pub mod results;
pub mod stats;
pub mod sweep;
pub mod synth;

pub use ablation::{rejection_vs_penalty_experiment, space_feasible_fraction, AblationRow};
pub use bench::{load_bench, write_bench, BenchRow, BenchTable, Dataset};
pub use results::{read_results, run_once, write_results, RunResult};
pub use stats::{feasible_fraction, feasible_ranking, op_distribution, OpDistribution, RankedArch};
pub use sweep::{run_sweep, CellSummary, Metric, SweepGrid, SweepReport};
pub use synth::SyntheticBench;
