//! Tabular benchmark: accuracies, MACs and per-device latency for every architecture.
//!
//! On disk the table is a CSV file with the header
//!
//! ```text
//! arch_str,cifar10_test,cifar100_test,in16_test,macs_m,edgegpu_ms,raspi4_ms,edgetpu_ms,pixel3_ms,eyeriss_ms,fpga_ms
//! ```
//!
//! one row per architecture. Latency cells may be left empty when a device was not
//! measured; every other cell is required.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{parse_arch_str, Genotype, SPACE_SIZE};
use crate::hwcost::DeviceId;

pub const HEADER: [&str; 11] = [
    "arch_str",
    "cifar10_test",
    "cifar100_test",
    "in16_test",
    "macs_m",
    "edgegpu_ms",
    "raspi4_ms",
    "edgetpu_ms",
    "pixel3_ms",
    "eyeriss_ms",
    "fpga_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dataset {
    #[serde(rename = "cifar10")]
    Cifar10,
    #[serde(rename = "cifar100")]
    Cifar100,
    #[serde(rename = "in16")]
    ImageNet16,
}

impl Dataset {
    pub const ALL: [Dataset; 3] = [Dataset::Cifar10, Dataset::Cifar100, Dataset::ImageNet16];

    pub fn name(self) -> &'static str {
        match self {
            Dataset::Cifar10 => "cifar10",
            Dataset::Cifar100 => "cifar100",
            Dataset::ImageNet16 => "in16",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dataset::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown dataset `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    /// Test accuracy in percent, indexed like [`Dataset::ALL`].
    pub accuracy: [f64; 3],
    pub macs_m: f64,
    /// Latency in milliseconds, indexed like [`DeviceId::ALL`].
    pub latency_ms: [Option<f64>; 6],
}

impl BenchRow {
    pub fn accuracy(&self, dataset: Dataset) -> f64 {
        self.accuracy[dataset.index()]
    }

    pub fn latency(&self, device: DeviceId) -> Option<f64> {
        self.latency_ms[device.index()]
    }

    fn validate(&self) -> std::result::Result<(), (usize, String)> {
        let values = self
            .accuracy
            .iter()
            .copied()
            .map(Some)
            .chain(std::iter::once(Some(self.macs_m)))
            .chain(self.latency_ms.iter().copied());
        for (i, v) in values.enumerate() {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 {
                    return Err((i + 1, format!("value {v} must be finite and non-negative")));
                }
            }
        }
        Ok(())
    }
}

/// Benchmark rows keyed by architecture; partial tables are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    rows: Vec<Option<BenchRow>>,
    order: Vec<Genotype>,
}

impl Default for BenchTable {
    fn default() -> Self {
        Self::new()
    }
}

impl BenchTable {
    pub fn new() -> Self {
        Self {
            rows: vec![None; SPACE_SIZE],
            order: Vec::new(),
        }
    }

    /// Adds a row; returns `false` (and leaves the table unchanged) if `g` is already present.
    pub fn insert(&mut self, g: Genotype, row: BenchRow) -> bool {
        let slot = &mut self.rows[g.index()];
        if slot.is_some() {
            return false;
        }
        *slot = Some(row);
        self.order.push(g);
        true
    }

    pub fn get(&self, g: &Genotype) -> Option<&BenchRow> {
        self.rows[g.index()].as_ref()
    }

    pub fn row(&self, g: &Genotype) -> Result<&BenchRow> {
        self.get(g).ok_or_else(|| Error::Lookup {
            arch: g.to_arch_str(),
            what: "architecture not in benchmark table".into(),
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.order.len() == SPACE_SIZE
    }

    pub fn has_device(&self, device: DeviceId) -> bool {
        self.iter().all(|(_, row)| row.latency(device).is_some())
    }

    /// Rows in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (Genotype, &BenchRow)> + '_ {
        self.order
            .iter()
            .map(|g| (*g, self.rows[g.index()].as_ref().expect("ordered rows are present")))
    }

    pub fn read_csv<R: Read>(reader: R, path: &Path) -> Result<Self> {
        let schema = |line: usize, column: &str, reason: String| Error::Schema {
            path: path.to_path_buf(),
            line,
            column: column.to_string(),
            reason,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            Some(rec) => rec.map_err(|e| schema(1, "header", e.to_string()))?,
            None => return Err(schema(1, "header", "file is empty".into())),
        };
        if header.iter().ne(HEADER.iter().copied()) {
            return Err(schema(1, "header", format!("expected `{}`", HEADER.join(","))));
        }
        let mut table = BenchTable::new();
        for rec in records {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                schema(line, "record", e.to_string())
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            if rec.len() != HEADER.len() {
                return Err(schema(
                    line,
                    "record",
                    format!("expected {} fields, found {}", HEADER.len(), rec.len()),
                ));
            }
            let arch = parse_arch_str(&rec[0]).map_err(|e| schema(line, HEADER[0], e.to_string()))?;
            let number = |i: usize| -> Result<Option<f64>> {
                let cell = rec[i].trim();
                if cell.is_empty() {
                    return Ok(None);
                }
                cell.parse::<f64>()
                    .map(Some)
                    .map_err(|e| schema(line, HEADER[i], format!("`{cell}`: {e}")))
            };
            let required =
                |i: usize| -> Result<f64> { number(i)?.ok_or_else(|| schema(line, HEADER[i], "missing value".into())) };
            let row = BenchRow {
                accuracy: [required(1)?, required(2)?, required(3)?],
                macs_m: required(4)?,
                latency_ms: [number(5)?, number(6)?, number(7)?, number(8)?, number(9)?, number(10)?],
            };
            row.validate()
                .map_err(|(col, reason)| schema(line, HEADER[col], reason))?;
            if !table.insert(arch, row) {
                return Err(Error::DuplicateKey {
                    path: path.to_path_buf(),
                    line,
                    arch: arch.to_arch_str(),
                });
            }
        }
        Ok(table)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(HEADER).map_err(io)?;
        for (g, row) in self.iter() {
            let mut fields = Vec::with_capacity(HEADER.len());
            fields.push(g.to_arch_str());
            fields.extend(row.accuracy.iter().map(|v| v.to_string()));
            fields.push(row.macs_m.to_string());
            fields.extend(
                row.latency_ms
                    .iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            );
            w.write_record(&fields).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loads and validates a benchmark CSV file.
pub fn load_bench(path: impl AsRef<Path>) -> Result<BenchTable> {
    let path = path.as_ref();
    let file = File::open(path)?;
    BenchTable::read_csv(file, path)
}

pub fn write_bench(table: &BenchTable, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    table.write_csv(BufWriter::new(file))
}

/// Path used in error messages for in-memory tables.
pub fn memory_path() -> PathBuf {
    PathBuf::from("<memory>")
}
