//! Command-line front end: single searches, constraint sweeps, the rejection ablation,
//! table statistics and synthetic table generation.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hwnas::engine::{EstimatorKind, SearchConfig};
use hwnas::harness::results::write_records;
use hwnas::harness::stats::{feasible_ranking, op_distribution};
use hwnas::harness::{
    load_bench, rejection_vs_penalty_experiment, run_once, run_sweep, write_bench, write_results, BenchTable, Dataset,
    Metric, SweepGrid, SyntheticBench,
};
use hwnas::hwcost::{Constraint, CostQuery, DeviceId, MacroSkeleton, DEFAULT_MAX_ATTEMPTS};

#[derive(Parser)]
#[command(name = "hwnas", version, about = "Hardware-constrained evolutionary cell search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one search.
    Search(SearchArgs),
    /// Run a search per (threshold, device, seed) and summarise each cell.
    Sweep(SweepArgs),
    /// Compare samples needed by rejection sampling and by the penalty.
    AblateRejection(AblateArgs),
    /// Operation distribution of the top feasible architectures of a table.
    Stats(StatsArgs),
    /// Write a seeded synthetic benchmark table.
    GenBench(GenBenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Rmi,
    Tabular,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MetricArg {
    Macs,
    Latency,
}

#[derive(Args)]
struct CommonArgs {
    /// Benchmark CSV; required for the tabular estimator and latency constraints.
    #[arg(long)]
    bench: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "macs")]
    metric: MetricArg,
    #[arg(long, default_value = "edgegpu")]
    device: DeviceId,
    #[arg(long, default_value = "cifar10")]
    dataset: Dataset,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value = "rmi")]
    estimator: EstimatorArg,
    /// Cost threshold in the metric's units; `inf` disables the constraint.
    #[arg(long, default_value = "inf")]
    omega: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    gens: usize,
    #[arg(long, default_value_t = 20)]
    pop: usize,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Results file, one JSON record per line; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value = "tabular")]
    estimator: EstimatorArg,
    #[arg(long, value_delimiter = ',', required = true)]
    omegas: Vec<f64>,
    /// Devices for latency sweeps; defaults to `--device`.
    #[arg(long, value_delimiter = ',')]
    devices: Vec<DeviceId>,
    /// Number of seeds, 0..N.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 100)]
    gens: usize,
    #[arg(long, default_value_t = 20)]
    pop: usize,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Per-run results file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-cell summary file; stdout when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    omegas: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    size: usize,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    max_attempts: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value = "inf")]
    omega: f64,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
}

#[derive(Args)]
struct GenBenchArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

impl CommonArgs {
    fn query(&self) -> CostQuery {
        match self.metric {
            MetricArg::Macs => CostQuery::Macs,
            MetricArg::Latency => CostQuery::Latency(self.device),
        }
    }

    fn table(&self) -> Result<Option<BenchTable>> {
        self.bench
            .as_deref()
            .map(|p| load_bench(p).with_context(|| format!("loading {}", p.display())))
            .transpose()
    }

    fn require_table(&self) -> Result<BenchTable> {
        match self.table()? {
            Some(t) => Ok(t),
            None => bail!("--bench is required here"),
        }
    }
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Rmi => EstimatorKind::RmiSurrogate,
            EstimatorArg::Tabular => EstimatorKind::TabularAccuracy,
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn search(args: SearchArgs) -> Result<()> {
    let table = args.common.table()?;
    let cfg = SearchConfig {
        generations: args.gens,
        population: args.pop,
        train_epochs: args.epochs,
        beta: args.beta,
        constraint: Constraint::new(args.omega, args.common.query())?,
        estimator: args.estimator.into(),
        dataset: args.common.dataset,
        seed: args.seed,
        ..SearchConfig::default()
    };
    let result = run_once(&cfg, table.as_ref())?;
    eprintln!(
        "best {} fitness {:.6} cost {} {} ({:.2}s)",
        result.best_arch, result.best.fitness, result.best.cost.value, result.best.cost.unit, result.duration_s
    );
    match args.out {
        Some(p) => write_results(&[result], &p).with_context(|| format!("writing {}", p.display()))?,
        None => write_records(&[result], output(None)?)?,
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let table = args.common.require_table()?;
    let devices = if args.devices.is_empty() {
        vec![args.common.device]
    } else {
        args.devices
    };
    let grid = SweepGrid {
        metric: match args.common.metric {
            MetricArg::Macs => Metric::Macs,
            MetricArg::Latency => Metric::Latency,
        },
        omegas: args.omegas,
        devices,
        seeds: (0..args.seeds).collect(),
    };
    let template = SearchConfig {
        generations: args.gens,
        population: args.pop,
        train_epochs: args.epochs,
        beta: args.beta,
        estimator: args.estimator.into(),
        dataset: args.common.dataset,
        ..SearchConfig::default()
    };
    let report = run_sweep(&grid, &template, &table)?;
    if let Some(p) = &args.out {
        write_results(&report.results, p).with_context(|| format!("writing {}", p.display()))?;
    }
    write_records(&report.cells, output(args.summary.as_deref())?)?;
    let failed = report.cells.iter().filter(|c| c.failed()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells had failing runs", report.cells.len());
    }
    Ok(())
}

fn ablate(args: AblateArgs) -> Result<()> {
    let query = args.common.query();
    let constraints = args
        .omegas
        .iter()
        .map(|&o| Constraint::new(o, query))
        .collect::<hwnas::Result<Vec<_>>>()?;
    let rows = match args.common.table()? {
        Some(table) => {
            rejection_vs_penalty_experiment(&constraints, &table, args.size, args.runs, args.max_attempts, args.seed)?
        }
        None if args.common.metric == MetricArg::Macs => rejection_vs_penalty_experiment(
            &constraints,
            &MacroSkeleton::default(),
            args.size,
            args.runs,
            args.max_attempts,
            args.seed,
        )?,
        None => bail!("latency ablations need --bench"),
    };
    write_records(&rows, output(args.out.as_deref())?)?;
    Ok(())
}

fn stats(args: StatsArgs) -> Result<()> {
    let table = args.common.require_table()?;
    let constraint = Constraint::new(args.omega, args.common.query())?;
    let ranking = feasible_ranking(&table, &constraint, args.common.dataset)?;
    let top: Vec<_> = ranking.iter().take(args.top_k).map(|r| r.arch).collect();
    let dist = op_distribution(&top).context("no feasible architectures")?;
    let mut out = output(None)?;
    writeln!(
        out,
        "{}",
        serde_json::json!({
            "feasible": ranking.len(),
            "top_k": top.len(),
            "best": ranking.first(),
            "ops": dist,
        })
    )?;
    Ok(())
}

fn gen_bench(args: GenBenchArgs) -> Result<()> {
    let table = SyntheticBench::new(args.seed).generate();
    write_bench(&table, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!("wrote {} rows to {}", table.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            eprintln!("{}", rendered.lines().next().unwrap_or("error: invalid arguments"));
            return ExitCode::from(2);
        }
    };
    let outcome = match cli.command {
        Command::Search(a) => search(a),
        Command::Sweep(a) => sweep(a),
        Command::AblateRejection(a) => ablate(a),
        Command::Stats(a) => stats(a),
        Command::GenBench(a) => gen_bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
