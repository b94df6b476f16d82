#![allow(dead_code)]

use hwnas::estimator::{FeatureStack, SurrogateNet, TrainSettings};
use hwnas::genotype::{random_genotype, Operation};
use hwnas::harness::{BenchTable, SyntheticBench};
use hwnas::hwcost::{Constraint, CostQuery, DeviceId};
use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::OnceLock;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

/// Random stack of depth 1..=4, 2..=12 rows, layer widths 1..=8.
pub fn random_stack_shape(rng: &mut impl Rng) -> (usize, Vec<usize>) {
    let depth = rng.random_range(1..=4);
    let rows = rng.random_range(2..=12);
    (rows, (0..depth).map(|_| rng.random_range(1..=8)).collect())
}

pub fn random_stack(rng: &mut impl Rng, rows: usize, widths: &[usize]) -> FeatureStack<f64> {
    FeatureStack::new(widths.iter().map(|&w| gaussian(rng, rows, w)).collect()).unwrap()
}

/// Haar-ish random orthogonal matrix from the QR factorisation of a Gaussian matrix.
pub fn orthogonal(rng: &mut impl Rng, d: usize) -> Array2<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let q = a.qr().q();
    Array2::from_shape_fn((d, d), |(i, j)| q[(i, j)])
}

/// Brute-force layer term straight from the definition, as an independent oracle.
pub fn naive_layer_term(r: &Array2<f64>, x: &Array2<f64>) -> f64 {
    let fro2 = |a: &Array2<f64>, b: &Array2<f64>| {
        let mut s = 0.0;
        for i in 0..a.ncols() {
            for j in 0..b.ncols() {
                let dot: f64 = (0..a.nrows()).map(|k| a[[k, i]] * b[[k, j]]).sum();
                s += dot * dot;
            }
        }
        s
    };
    let num = fro2(r, x);
    let den = fro2(r, r).sqrt() * fro2(x, x).sqrt();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// A small random training problem: net, reference stack, settings.
pub struct Instance {
    pub net: SurrogateNet<f64>,
    pub reference: FeatureStack<f64>,
    pub settings: TrainSettings<f64>,
}

pub fn random_instance(rng: &mut impl Rng, id: u64) -> Instance {
    let rows = rng.random_range(4..=10);
    let d_in = rng.random_range(2..=6);
    let width = rng.random_range(3..=6);
    let g = random_genotype(rng);
    let net = SurrogateNet::from_genotype(&g, d_in, width, id).unwrap();
    let ref_widths: Vec<usize> = (0..net.depth()).map(|_| rng.random_range(2..=6)).collect();
    instance(rng, net, rows, &ref_widths)
}

/// Two-node network (stem plus one 1x1 convolution), d = 4, n = 8.
pub fn two_layer_instance(rng: &mut impl Rng) -> Instance {
    let net = SurrogateNet::from_edges(2, &[(1, 0, Operation::NorConv1x1)], 4, 4, 17).unwrap();
    instance(rng, net, 8, &[4, 4])
}

fn instance(rng: &mut impl Rng, net: SurrogateNet<f64>, rows: usize, ref_widths: &[usize]) -> Instance {
    let reference = random_stack(rng, rows, ref_widths);
    let settings = TrainSettings {
        epochs: 0,
        beta: rng.random_range(0.0..=1.0),
        step: 1e-2,
        batch: gaussian(rng, rows, net.input_width()),
        targets: gaussian(rng, rows, net.width()).mapv(|v| 0.5 * v),
    };
    Instance {
        net,
        reference,
        settings,
    }
}

/// Relative error ‖a − n‖ / max(‖a‖, ‖n‖) between analytic and central-difference
/// gradients over every trainable weight, or 0 when both vanish.
pub fn gradient_check(inst: &Instance, h: f64) -> f64 {
    let (_, grad) = inst.net.loss_and_grad(&inst.reference, &inst.settings).unwrap();
    let analytic: Vec<f64> = grad.tensors().iter().flat_map(|t| t.iter().copied()).collect();
    let mut numeric = Vec::with_capacity(analytic.len());
    let shapes: Vec<usize> = inst.net.parameters().iter().map(|p| p.len()).collect();
    for (pi, &len) in shapes.iter().enumerate() {
        for k in 0..len {
            let eval = |delta: f64| {
                let mut net = inst.net.clone();
                let mut params = net.parameters_mut();
                let slot = params[pi].as_slice_mut().unwrap();
                slot[k] += delta;
                net.objective(&inst.reference, &inst.settings).unwrap().0
            };
            numeric.push((eval(h) - eval(-h)) / (2.0 * h));
        }
    }
    assert_eq!(analytic.len(), numeric.len());
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
    let scale = norm(&analytic).max(norm(&numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn synthetic_table() -> &'static BenchTable {
    static TABLE: OnceLock<BenchTable> = OnceLock::new();
    TABLE.get_or_init(|| SyntheticBench::new(0).generate())
}

/// Threshold admitting (as nearly as ties allow) the fraction `p` of the table.
pub fn latency_quantile(table: &BenchTable, device: DeviceId, p: f64) -> Constraint {
    let mut lat: Vec<f64> = table.iter().map(|(_, r)| r.latency(device).unwrap()).collect();
    lat.sort_by(f64::total_cmp);
    let k = ((p * lat.len() as f64).round() as usize).clamp(1, lat.len());
    Constraint::new(lat[k - 1], CostQuery::Latency(device)).unwrap()
}
