//! Desk-scale differentiable stand-in for a candidate network.
//!
//! A [`SurrogateNet`] mirrors the cell DAG: a `tanh` stem maps the batch to node 0,
//! and every later node is the sum of its incoming edge transforms. An edge reading
//! from node `i > 0` sees `h_i + h_0` (a stem shortcut), so that an edge leaving an
//! otherwise empty node still carries signal. Edge transforms by operation:
//!
//! * `none`: zero block
//! * `skip_connect`: identity
//! * `avg_pool_3x3`: fixed average over each feature and its two cyclic neighbours
//! * `nor_conv_1x1`: `tanh(U · W)` with `W` a trainable cyclic band of 3 taps
//! * `nor_conv_3x3`: `tanh(U · W)` with `W` a trainable cyclic band of 7 taps
//!
//! The feature stack holds every node, stem first, so a 4-node cell yields 4 layers.

use ndarray::{Array2, ArrayView2, Zip};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::similarity::{check_beta, combine, layer_term, layer_term_with_grad, FeatureStack};
use crate::error::{Error, Result};
use crate::genotype::{Genotype, Operation, EDGES, NUM_NODES};
use crate::scalar::Scalar;
use crate::seed;

const STEM_STREAM: u64 = 0x5745_4d00;
const EDGE_STREAM: u64 = 0xED6E_0000;
const BATCH_STREAM: u64 = 0xBA7C_0000;
const REFERENCE_STREAM: u64 = 0x2EF0_0000;

fn band_radius(op: Operation) -> Option<usize> {
    match op {
        Operation::NorConv1x1 => Some(1),
        Operation::NorConv3x3 => Some(3),
        _ => None,
    }
}

fn cyclic_distance(i: usize, j: usize, n: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(n - d)
}

fn band_mask<T: Scalar>(width: usize, radius: usize) -> Array2<T> {
    Array2::from_shape_fn((width, width), |(i, j)| {
        if cyclic_distance(i, j, width) <= radius {
            T::one()
        } else {
            T::zero()
        }
    })
}

fn pool_matrix<T: Scalar>(width: usize) -> Array2<T> {
    let third = T::of(1.0 / 3.0);
    let mut p = Array2::zeros((width, width));
    for j in 0..width {
        for k in [width - 1, 0, 1] {
            p[((j + k) % width, j)] += third;
        }
    }
    p
}

fn uniform_init<T: Scalar, R: Rng>(rng: &mut R, shape: (usize, usize), fan_in: usize) -> Array2<T> {
    let bound = (3.0 / fan_in.max(1) as f64).sqrt();
    Array2::from_shape_simple_fn(shape, || T::of(rng.random_range(-bound..=bound)))
}

fn tanh_backward<T: Scalar>(grad: &Array2<T>, activated: &Array2<T>) -> Array2<T> {
    let mut out = grad.clone();
    Zip::from(&mut out)
        .and(activated)
        .for_each(|g, &y| *g *= T::one() - y * y);
    out
}

/// One edge of a surrogate DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateEdge<T> {
    pub to: usize,
    pub from: usize,
    pub op: Operation,
    weight: Option<Array2<T>>,
    mask: Option<Array2<T>>,
}

impl<T: Scalar> SurrogateEdge<T> {
    pub fn weight(&self) -> Option<&Array2<T>> {
        self.weight.as_ref()
    }

    fn effective_weight(&self) -> Option<Array2<T>> {
        match (&self.weight, &self.mask) {
            (Some(w), Some(m)) => Some(w * m),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateNet<T> {
    stem: Array2<T>,
    edges: Vec<SurrogateEdge<T>>,
    nodes: usize,
    width: usize,
    pool: Array2<T>,
}

/// Gradient of the training loss, laid out like [`SurrogateNet::parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<T> {
    pub stem: Array2<T>,
    pub edges: Vec<Option<Array2<T>>>,
}

impl<T: Scalar> Gradient<T> {
    pub fn tensors(&self) -> Vec<&Array2<T>> {
        std::iter::once(&self.stem).chain(self.edges.iter().flatten()).collect()
    }
}

struct Pass<T> {
    nodes: Vec<Array2<T>>,
    inputs: Vec<Array2<T>>,
    activations: Vec<Option<Array2<T>>>,
}

impl<T: Scalar> SurrogateNet<T> {
    /// Builds a DAG with `nodes` nodes (node 0 is the stem output) from `(to, from, op)`
    /// triples, which must be sorted by `to` and satisfy `from < to < nodes`.
    pub fn from_edges(
        nodes: usize,
        edges: &[(usize, usize, Operation)],
        d_in: usize,
        width: usize,
        seed: u64,
    ) -> Result<Self> {
        if nodes == 0 || d_in == 0 || width == 0 {
            return Err(Error::Shape(
                "surrogate needs at least one node and non-zero widths".into(),
            ));
        }
        let mut last_to = 0;
        let mut built = Vec::with_capacity(edges.len());
        for &(to, from, op) in edges {
            if to >= nodes || from >= to || to < last_to {
                return Err(Error::Shape(format!(
                    "edge ({to} <- {from}) invalid for a {nodes}-node DAG in target order"
                )));
            }
            last_to = to;
            let (weight, mask) = match band_radius(op) {
                Some(radius) => {
                    let mask = band_mask::<T>(width, radius);
                    let taps = mask.column(0).iter().filter(|&&m| m == T::one()).count();
                    let mut rng = seed::rng(seed, &[EDGE_STREAM, to as u64, from as u64, op.code() as u64]);
                    let w = uniform_init::<T, _>(&mut rng, (width, width), taps) * &mask;
                    (Some(w), Some(mask))
                }
                None => (None, None),
            };
            built.push(SurrogateEdge {
                to,
                from,
                op,
                weight,
                mask,
            });
        }
        let mut rng = seed::rng(seed, &[STEM_STREAM, d_in as u64, width as u64]);
        Ok(Self {
            stem: uniform_init(&mut rng, (d_in, width), d_in),
            edges: built,
            nodes,
            width,
            pool: pool_matrix(width),
        })
    }

    /// The 4-node cell network for `g`, initialised from `(g, seed)`.
    pub fn from_genotype(g: &Genotype, d_in: usize, width: usize, seed: u64) -> Result<Self> {
        let edges: Vec<_> = EDGES
            .iter()
            .zip(g.genes())
            .map(|(&(to, from), &op)| (to, from, op))
            .collect();
        Self::from_edges(NUM_NODES, &edges, d_in, width, seed)
    }

    pub fn depth(&self) -> usize {
        self.nodes
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn input_width(&self) -> usize {
        self.stem.nrows()
    }

    pub fn edges(&self) -> &[SurrogateEdge<T>] {
        &self.edges
    }

    /// Trainable tensors: the stem, then each convolution weight in edge order.
    pub fn parameters(&self) -> Vec<&Array2<T>> {
        std::iter::once(&self.stem)
            .chain(self.edges.iter().filter_map(|e| e.weight.as_ref()))
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Array2<T>> {
        std::iter::once(&mut self.stem)
            .chain(self.edges.iter_mut().filter_map(|e| e.weight.as_mut()))
            .collect()
    }

    fn check_batch(&self, batch: ArrayView2<'_, T>) -> Result<()> {
        if batch.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "batch has {} columns, surrogate expects {}",
                batch.ncols(),
                self.input_width()
            )));
        }
        Ok(())
    }

    fn run(&self, batch: ArrayView2<'_, T>) -> Pass<T> {
        let n = batch.nrows();
        let stem = batch.dot(&self.stem).mapv(T::tanh);
        let mut nodes = vec![Array2::zeros((n, self.width)); self.nodes];
        nodes[0] = stem;
        let mut inputs = Vec::with_capacity(self.edges.len());
        let mut activations = Vec::with_capacity(self.edges.len());
        for edge in &self.edges {
            let input = if edge.from == 0 {
                nodes[0].clone()
            } else {
                &nodes[edge.from] + &nodes[0]
            };
            let (out, act) = match edge.op {
                Operation::None => (None, None),
                Operation::SkipConnect => (Some(input.clone()), None),
                Operation::AvgPool3x3 => (Some(input.dot(&self.pool)), None),
                Operation::NorConv1x1 | Operation::NorConv3x3 => {
                    let w = edge.effective_weight().expect("conv edges carry weights");
                    let y = input.dot(&w).mapv(T::tanh);
                    (Some(y.clone()), Some(y))
                }
            };
            if let Some(out) = out {
                nodes[edge.to] += &out;
            }
            inputs.push(input);
            activations.push(act);
        }
        Pass {
            nodes,
            inputs,
            activations,
        }
    }

    pub fn forward(&self, batch: ArrayView2<'_, T>) -> Result<FeatureStack<T>> {
        self.check_batch(batch)?;
        FeatureStack::new(self.run(batch).nodes)
    }

    fn check_objective(&self, reference: &FeatureStack<T>, settings: &TrainSettings<T>) -> Result<()> {
        settings.validate()?;
        self.check_batch(settings.batch.view())?;
        if reference.depth() != self.nodes {
            return Err(Error::Shape(format!(
                "reference has {} layers, surrogate has {}",
                reference.depth(),
                self.nodes
            )));
        }
        if reference.rows() != settings.batch.nrows() {
            return Err(Error::Shape(format!(
                "reference was computed on {} rows, batch has {}",
                reference.rows(),
                settings.batch.nrows()
            )));
        }
        if settings.targets.dim() != (settings.batch.nrows(), self.width) {
            return Err(Error::Shape(format!(
                "targets are {:?}, expected ({}, {})",
                settings.targets.dim(),
                settings.batch.nrows(),
                self.width
            )));
        }
        Ok(())
    }

    fn task_loss(&self, output: &Array2<T>, targets: &Array2<T>) -> T {
        let count = T::of(output.len() as f64);
        let sum = Zip::from(output)
            .and(targets)
            .fold(T::zero(), |acc, &o, &t| acc + (o - t) * (o - t));
        sum / count
    }

    /// Training loss and similarity score, forward only.
    pub fn objective(&self, reference: &FeatureStack<T>, settings: &TrainSettings<T>) -> Result<(T, T)> {
        self.check_objective(reference, settings)?;
        let pass = self.run(settings.batch.view());
        let mut score = T::zero();
        for (r, x) in reference.layers().iter().zip(&pass.nodes) {
            score += layer_term(r.view(), x.view())?;
        }
        let task = self.task_loss(pass.nodes.last().expect("at least one node"), &settings.targets);
        Ok((combine(score, self.nodes, task, settings.beta), score))
    }

    /// Training loss and its gradient with respect to every trainable weight.
    pub fn loss_and_grad(&self, reference: &FeatureStack<T>, settings: &TrainSettings<T>) -> Result<(T, Gradient<T>)> {
        self.check_objective(reference, settings)?;
        let beta = settings.beta;
        let pass = self.run(settings.batch.view());
        let depth = T::of(self.nodes as f64);
        let sim_scale = -beta / depth;

        let mut score = T::zero();
        let mut grads = Vec::with_capacity(self.nodes);
        for (r, x) in reference.layers().iter().zip(&pass.nodes) {
            let (term, g) = layer_term_with_grad(r.view(), x.view())?;
            score += term;
            grads.push(g * sim_scale);
        }
        let last = self.nodes - 1;
        let output = &pass.nodes[last];
        let task = self.task_loss(output, &settings.targets);
        let task_scale = T::of(2.0) * (T::one() - beta) / T::of(output.len() as f64);
        grads[last] = &grads[last] + &((output - &settings.targets) * task_scale);

        let mut edge_grads = vec![None; self.edges.len()];
        for (idx, edge) in self.edges.iter().enumerate().rev() {
            let upstream = &grads[edge.to];
            let into_input = match edge.op {
                Operation::None => None,
                Operation::SkipConnect => Some(upstream.clone()),
                Operation::AvgPool3x3 => Some(upstream.dot(&self.pool.t())),
                Operation::NorConv1x1 | Operation::NorConv3x3 => {
                    let y = pass.activations[idx].as_ref().expect("conv activation cached");
                    let dz = tanh_backward(upstream, y);
                    let mask = edge.mask.as_ref().expect("conv edges carry masks");
                    edge_grads[idx] = Some(pass.inputs[idx].t().dot(&dz) * mask);
                    let w = edge.effective_weight().expect("conv edges carry weights");
                    Some(dz.dot(&w.t()))
                }
            };
            if let Some(g) = into_input {
                if edge.from != 0 {
                    grads[0] += &g;
                }
                grads[edge.from] += &g;
            }
        }
        let dz = tanh_backward(&grads[0], &pass.nodes[0]);
        let stem = settings.batch.t().dot(&dz);
        Ok((
            combine(score, self.nodes, task, beta),
            Gradient {
                stem,
                edges: edge_grads,
            },
        ))
    }

    fn apply(&mut self, grad: &Gradient<T>, step: T) {
        self.stem.scaled_add(-step, &grad.stem);
        for (edge, g) in self.edges.iter_mut().zip(&grad.edges) {
            if let (Some(w), Some(g)) = (edge.weight.as_mut(), g.as_ref()) {
                w.scaled_add(-step, g);
            }
        }
    }
}

/// Settings for single-batch training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings<T> {
    pub epochs: usize,
    pub beta: T,
    pub step: T,
    pub batch: Array2<T>,
    pub targets: Array2<T>,
}

impl<T: Scalar> TrainSettings<T> {
    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        if !(self.step > T::zero() && self.step.is_finite()) {
            return Err(Error::Argument(format!("step size {} must be positive", self.step)));
        }
        if self.batch.nrows() != self.targets.nrows() {
            return Err(Error::Shape(format!(
                "batch has {} rows, targets have {}",
                self.batch.nrows(),
                self.targets.nrows()
            )));
        }
        Ok(())
    }
}

/// Fixed reference representation the search tries to match.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel<T> {
    pub stack: FeatureStack<T>,
    pub descriptor: String,
}

impl<T: Scalar> ReferenceModel<T> {
    pub fn new(stack: FeatureStack<T>, descriptor: impl Into<String>) -> Self {
        Self {
            stack,
            descriptor: descriptor.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trained<T> {
    pub net: SurrogateNet<T>,
    pub phi: T,
    pub initial_phi: T,
    /// Loss before each update, followed by the loss after the last one.
    pub losses: Vec<T>,
}

/// Runs `settings.epochs` full-batch gradient steps on the combined loss.
/// Non-finite activations after at least one update mean the iteration blew up.
fn diverged(e: Error, epoch: usize) -> Error {
    match e {
        Error::Numeric(_) if epoch > 0 => Error::Divergence { epoch, loss: f64::NAN },
        other => other,
    }
}

pub fn train_single_batch<T: Scalar>(
    mut net: SurrogateNet<T>,
    reference: &ReferenceModel<T>,
    settings: &TrainSettings<T>,
) -> Result<Trained<T>> {
    let (initial_loss, initial_phi) = net.objective(&reference.stack, settings)?;
    let mut losses = Vec::with_capacity(settings.epochs + 1);
    for epoch in 0..settings.epochs {
        let (loss, grad) = net
            .loss_and_grad(&reference.stack, settings)
            .map_err(|e| diverged(e, epoch))?;
        if !loss.is_finite() || !grad.tensors().iter().all(|g| g.iter().all(|v| v.is_finite())) {
            return Err(Error::Divergence {
                epoch,
                loss: loss.as_f64(),
            });
        }
        losses.push(loss);
        net.apply(&grad, settings.step);
    }
    let (final_loss, phi) = match settings.epochs {
        0 => (initial_loss, initial_phi),
        _ => net
            .objective(&reference.stack, settings)
            .map_err(|e| diverged(e, settings.epochs))?,
    };
    if !final_loss.is_finite() {
        return Err(Error::Divergence {
            epoch: settings.epochs,
            loss: final_loss.as_f64(),
        });
    }
    losses.push(final_loss);
    Ok(Trained {
        net,
        phi,
        initial_phi,
        losses,
    })
}

/// Untrained forward stack of the cell network for `g`; the width of every node
/// equals the batch width.
pub fn synth_forward<T: Scalar>(g: &Genotype, batch: ArrayView2<'_, T>, seed: u64) -> Result<FeatureStack<T>> {
    SurrogateNet::from_genotype(g, batch.ncols(), batch.ncols(), seed)?.forward(batch)
}

/// Batch, reference and regression targets shared by every candidate in a run.
#[derive(Debug, Clone)]
pub struct SurrogateTask<T> {
    pub batch: Array2<T>,
    pub targets: Array2<T>,
    pub reference: ReferenceModel<T>,
}

impl<T: Scalar> SurrogateTask<T> {
    /// Gaussian batch of `rows × width`; the reference is the all-`nor_conv_3x3` cell
    /// under an independent seed, and the targets are its output node.
    pub fn synthetic(rows: usize, width: usize, seed: u64) -> Result<Self> {
        let mut rng = seed::rng(seed, &[BATCH_STREAM]);
        let batch = Array2::from_shape_simple_fn((rows, width), || {
            let v: f64 = StandardNormal.sample(&mut rng);
            T::of(v)
        });
        let reference_arch = Genotype::uniform(Operation::NorConv3x3);
        let stack = synth_forward(&reference_arch, batch.view(), seed::derive(seed, &[REFERENCE_STREAM]))?;
        let targets = stack.layers().last().expect("non-empty stack").clone();
        Ok(Self {
            batch,
            targets,
            reference: ReferenceModel::new(stack, format!("synthetic {reference_arch}")),
        })
    }

    pub fn settings(&self, epochs: usize, beta: T, step: T) -> TrainSettings<T> {
        TrainSettings {
            epochs,
            beta,
            step,
            batch: self.batch.clone(),
            targets: self.targets.clone(),
        }
    }
}
