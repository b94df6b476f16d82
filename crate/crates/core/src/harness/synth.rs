//! Seeded synthetic benchmark with the same schema as the real one.
//!
//! Accuracy saturates with the amount of trainable computation in the cell
//! (`nor_conv_3x3` > `nor_conv_1x1` > `skip_connect` > `avg_pool_3x3`) and collapses to
//! chance when the output node is disconnected from the input. Per-device latency is
//! affine in analytic MACs plus per-operation overheads, with multiplicative noise, so
//! devices disagree on the ranking of the same architectures.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::bench::{BenchRow, BenchTable};
use crate::genotype::{enumerate_space, Genotype, Operation, EDGES, NUM_NODES};
use crate::hwcost::{macs_estimate, DeviceId, MacroSkeleton};
use crate::seed;

/// Latency model of one device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceProfile {
    pub device: DeviceId,
    /// Fixed overhead, ms.
    pub base_ms: f64,
    /// Milliseconds per million MACs.
    pub ms_per_mmac: f64,
    /// Extra ms per edge carrying each operation, indexed by operation code.
    pub op_ms: [f64; 5],
    /// Standard deviation of the log-normal noise factor.
    pub noise: f64,
}

impl DeviceProfile {
    pub fn defaults() -> [DeviceProfile; 6] {
        [
            DeviceProfile {
                device: DeviceId::EdgeGpu,
                base_ms: 2.4,
                ms_per_mmac: 0.032,
                op_ms: [0.0, 0.05, 0.18, 0.22, 0.15],
                noise: 0.04,
            },
            DeviceProfile {
                device: DeviceId::Raspi4,
                base_ms: 1.1,
                ms_per_mmac: 0.21,
                op_ms: [0.0, 0.10, 0.35, 0.45, 0.60],
                noise: 0.05,
            },
            DeviceProfile {
                device: DeviceId::EdgeTpu,
                base_ms: 0.62,
                ms_per_mmac: 0.0042,
                op_ms: [0.0, 0.02, 0.03, 0.04, 0.30],
                noise: 0.03,
            },
            DeviceProfile {
                device: DeviceId::Pixel3,
                base_ms: 0.55,
                ms_per_mmac: 0.095,
                op_ms: [0.0, 0.08, 0.25, 0.20, 0.35],
                noise: 0.05,
            },
            DeviceProfile {
                device: DeviceId::Eyeriss,
                base_ms: 1.5,
                ms_per_mmac: 0.024,
                op_ms: [0.0, 0.15, 0.40, 0.10, 0.20],
                noise: 0.03,
            },
            DeviceProfile {
                device: DeviceId::Fpga,
                base_ms: 2.0,
                ms_per_mmac: 0.011,
                op_ms: [0.0, 0.01, 0.12, 0.12, 0.05],
                noise: 0.02,
            },
        ]
    }

    fn latency<R: Rng>(&self, g: &Genotype, macs_m: f64, rng: &mut R) -> f64 {
        let ops: f64 = g.genes().iter().map(|op| self.op_ms[op.code() as usize]).sum();
        let noise = Normal::new(0.0, self.noise).expect("noise is finite").sample(rng);
        (self.base_ms + self.ms_per_mmac * macs_m + ops) * f64::exp(noise)
    }
}

/// Accuracy model for one dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
struct AccuracyProfile {
    chance: f64,
    floor: f64,
    ceiling: f64,
}

const ACCURACY: [AccuracyProfile; 3] = [
    AccuracyProfile {
        chance: 10.0,
        floor: 55.0,
        ceiling: 94.6,
    },
    AccuracyProfile {
        chance: 1.0,
        floor: 22.0,
        ceiling: 73.8,
    },
    AccuracyProfile {
        chance: 0.83,
        floor: 14.0,
        ceiling: 47.2,
    },
];

/// Weight of each operation in the capacity score, indexed by code.
const CAPACITY: [f64; 5] = [0.0, 0.2, 0.55, 1.0, 0.08];
const SATURATION: f64 = 1.6;

/// Whether some path of non-`none` edges leads from the input node to the output node.
pub fn is_connected(g: &Genotype) -> bool {
    let mut reach = [false; NUM_NODES];
    reach[0] = true;
    for (&(to, from), &op) in EDGES.iter().zip(g.genes()) {
        if op != Operation::None && reach[from] {
            reach[to] = true;
        }
    }
    reach[NUM_NODES - 1]
}

/// Capacity score driving synthetic accuracy.
pub fn capacity(g: &Genotype) -> f64 {
    g.genes().iter().map(|op| CAPACITY[op.code() as usize]).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBench {
    pub seed: u64,
    pub skeleton: MacroSkeleton,
    pub devices: [DeviceProfile; 6],
    /// Standard deviation of accuracy noise, percentage points.
    pub accuracy_noise: f64,
}

impl SyntheticBench {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            skeleton: MacroSkeleton::default(),
            devices: DeviceProfile::defaults(),
            accuracy_noise: 0.35,
        }
    }

    /// Row for one architecture; depends only on `(seed, g)`.
    pub fn row(&self, g: &Genotype) -> BenchRow {
        let mut rng = seed::rng(self.seed, &[g.index() as u64]);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let shared: f64 = normal.sample(&mut rng);
        let connected = is_connected(g);
        let saturation = 1.0 - f64::exp(-capacity(g) / SATURATION);
        let mut accuracy = [0.0; 3];
        for (slot, profile) in accuracy.iter_mut().zip(ACCURACY.iter()) {
            let own: f64 = normal.sample(&mut rng);
            let noise = self.accuracy_noise * (0.8 * shared + 0.6 * own);
            let value = if connected {
                profile.floor + (profile.ceiling - profile.floor) * saturation + noise
            } else {
                profile.chance + 0.1 * noise.abs()
            };
            *slot = round_to(value.clamp(0.0, 100.0), 1e4);
        }
        let macs_m = macs_estimate(g, &self.skeleton);
        let mut latency_ms = [None; 6];
        for profile in &self.devices {
            latency_ms[profile.device.index()] = Some(round_to(profile.latency(g, macs_m, &mut rng), 1e6));
        }
        BenchRow {
            accuracy,
            macs_m,
            latency_ms,
        }
    }

    pub fn generate(&self) -> BenchTable {
        let mut table = BenchTable::new();
        for g in enumerate_space() {
            table.insert(g, self.row(&g));
        }
        table
    }
}

fn round_to(v: f64, scale: f64) -> f64 {
    (v * scale).round() / scale
}
