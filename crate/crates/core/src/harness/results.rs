//! Run results and their line-delimited JSON persistence.
//!
//! Each line is one JSON object; fields appear in declaration order, so the output is
//! byte-stable for equal inputs. An empty result list produces an empty file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::bench::BenchTable;
use crate::engine::{run_search, FitnessRecord, SearchConfig, SearchContext, SearchHistory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: SearchConfig,
    pub best_arch: String,
    pub best: FitnessRecord,
    pub history: SearchHistory,
    pub duration_s: f64,
    pub seed: u64,
}

impl RunResult {
    /// Copy with the wall-clock field zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            duration_s: 0.0,
            ..self.clone()
        }
    }
}

/// Runs one search and packages it with its configuration echo.
pub fn run_once(cfg: &SearchConfig, table: Option<&BenchTable>) -> Result<RunResult> {
    let started = Instant::now();
    let ctx = SearchContext::new(cfg, table)?;
    let outcome = run_search(cfg, &ctx)?;
    Ok(RunResult {
        config: cfg.clone(),
        best_arch: outcome.best.genotype.to_arch_str(),
        best: outcome.best,
        history: outcome.history,
        duration_s: started.elapsed().as_secs_f64(),
        seed: cfg.seed,
    })
}

pub fn write_records<T: Serialize, W: Write>(records: &[T], mut writer: W) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut writer, rec).map_err(|e| Error::Io(e.into()))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_records<T: DeserializeOwned, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| Error::Record { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_results(results: &[RunResult], path: impl AsRef<Path>) -> Result<()> {
    write_records(results, BufWriter::new(File::create(path)?))
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<RunResult>> {
    read_records(File::open(path)?)
}
