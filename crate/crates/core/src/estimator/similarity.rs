//! Layer-wise representation similarity.
//!
//! For one layer pair the score is
//! `‖Rᵀ X‖²_F / (‖Rᵀ R‖_F · ‖Xᵀ X‖_F)`, the linear-CKA form without centering,
//! where `R` is the reference layer and `X` the candidate layer (rows are samples).
//! The stack score sums this over layers.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ordered per-layer activations of one network on one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack<T> {
    layers: Vec<Array2<T>>,
}

impl<T: Scalar> FeatureStack<T> {
    pub fn new(layers: Vec<Array2<T>>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::Shape("a feature stack needs at least one layer".into()));
        };
        let rows = first.nrows();
        for (i, layer) in layers.iter().enumerate() {
            if layer.nrows() != rows {
                return Err(Error::Shape(format!(
                    "layer {i} has {} rows, layer 0 has {rows}",
                    layer.nrows()
                )));
            }
            if !layer.iter().all(|v| v.is_finite()) {
                return Err(Error::Numeric(format!("layer {i} contains a non-finite entry")));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Array2<T>] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Array2<T>> {
        self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn rows(&self) -> usize {
        self.layers[0].nrows()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.ncols()).collect()
    }

    /// Applies `f` to every layer, keeping the stack invariants.
    pub fn map_layers(&self, mut f: impl FnMut(usize, &Array2<T>) -> Array2<T>) -> Result<Self> {
        Self::new(self.layers.iter().enumerate().map(|(i, l)| f(i, l)).collect())
    }
}

pub(crate) fn frobenius<T: Scalar>(m: &Array2<T>) -> T {
    m.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
}

fn check_pair<T: Scalar>(reference: ArrayView2<'_, T>, candidate: ArrayView2<'_, T>) -> Result<()> {
    if reference.nrows() != candidate.nrows() {
        return Err(Error::Shape(format!(
            "reference layer has {} rows, candidate has {}",
            reference.nrows(),
            candidate.nrows()
        )));
    }
    if !reference.iter().chain(candidate.iter()).all(|v| v.is_finite()) {
        return Err(Error::Numeric("layer contains a non-finite entry".into()));
    }
    Ok(())
}

/// Pieces of one layer term, shared by the score and its gradient.
struct TermParts<T> {
    cross: Array2<T>,
    cand_gram: Array2<T>,
    ref_norm: T,
    cand_norm: T,
    value: T,
}

fn term_parts<T: Scalar>(reference: ArrayView2<'_, T>, candidate: ArrayView2<'_, T>) -> TermParts<T> {
    let cross = reference.t().dot(&candidate);
    let ref_gram = reference.t().dot(&reference);
    let cand_gram = candidate.t().dot(&candidate);
    let ref_norm = frobenius(&ref_gram);
    let cand_norm = frobenius(&cand_gram);
    let value = if ref_norm == T::zero() || cand_norm == T::zero() {
        // dead layers score as maximally dissimilar
        T::zero()
    } else {
        let num = cross.iter().fold(T::zero(), |acc, &v| acc + v * v);
        (num / (ref_norm * cand_norm)).min(T::one())
    };
    TermParts {
        cross,
        cand_gram,
        ref_norm,
        cand_norm,
        value,
    }
}

/// Similarity of one layer pair, in `[0, 1]`. Zero when either Gram matrix vanishes.
pub fn layer_term<T: Scalar>(reference: ArrayView2<'_, T>, candidate: ArrayView2<'_, T>) -> Result<T> {
    check_pair(reference, candidate)?;
    Ok(term_parts(reference, candidate).value)
}

/// Layer term together with its gradient with respect to the candidate layer.
pub fn layer_term_with_grad<T: Scalar>(
    reference: ArrayView2<'_, T>,
    candidate: ArrayView2<'_, T>,
) -> Result<(T, Array2<T>)> {
    check_pair(reference, candidate)?;
    let parts = term_parts(reference, candidate);
    if parts.value == T::zero() {
        return Ok((T::zero(), Array2::zeros(candidate.raw_dim())));
    }
    let two = T::of(2.0);
    // d/dX ‖RᵀX‖² = 2 R RᵀX ; d/dX ‖XᵀX‖ = 2 X XᵀX / ‖XᵀX‖
    let numer_grad = reference.dot(&parts.cross) * (two / (parts.ref_norm * parts.cand_norm));
    let norm_grad = candidate.dot(&parts.cand_gram) * (two * parts.value / (parts.cand_norm * parts.cand_norm));
    Ok((parts.value, numer_grad - norm_grad))
}

fn check_stacks<T: Scalar>(reference: &FeatureStack<T>, candidate: &FeatureStack<T>) -> Result<()> {
    if reference.depth() != candidate.depth() {
        return Err(Error::Shape(format!(
            "reference stack has {} layers, candidate has {}",
            reference.depth(),
            candidate.depth()
        )));
    }
    if reference.rows() != candidate.rows() {
        return Err(Error::Shape(format!(
            "reference batch has {} rows, candidate has {}",
            reference.rows(),
            candidate.rows()
        )));
    }
    Ok(())
}

/// Sum of per-layer similarity terms, in `[0, L]`.
pub fn rmi_score<T: Scalar>(reference: &FeatureStack<T>, candidate: &FeatureStack<T>) -> Result<T> {
    check_stacks(reference, candidate)?;
    reference
        .layers()
        .iter()
        .zip(candidate.layers())
        .try_fold(T::zero(), |acc, (r, c)| Ok(acc + layer_term(r.view(), c.view())?))
}

/// Per-layer terms, in layer order.
pub fn layer_terms<T: Scalar>(reference: &FeatureStack<T>, candidate: &FeatureStack<T>) -> Result<Vec<T>> {
    check_stacks(reference, candidate)?;
    reference
        .layers()
        .iter()
        .zip(candidate.layers())
        .map(|(r, c)| layer_term(r.view(), c.view()))
        .collect()
}

pub(crate) fn check_beta<T: Scalar>(beta: T) -> Result<()> {
    if !(beta >= T::zero() && beta <= T::one()) {
        return Err(Error::Argument(format!("beta {beta} outside [0, 1]")));
    }
    Ok(())
}

/// Single-batch training objective:
/// `β · (1 − score / L) + (1 − β) · task_loss`.
///
/// The similarity enters as a normalised dissimilarity so that minimising the loss
/// raises the score.
pub fn combined_loss<T: Scalar>(
    candidate: &FeatureStack<T>,
    reference: &FeatureStack<T>,
    task_loss: T,
    beta: T,
) -> Result<T> {
    check_beta(beta)?;
    if !(task_loss >= T::zero()) {
        return Err(Error::Argument(format!("task loss {task_loss} must be non-negative")));
    }
    let score = rmi_score(reference, candidate)?;
    Ok(combine(score, candidate.depth(), task_loss, beta))
}

pub(crate) fn combine<T: Scalar>(score: T, depth: usize, task_loss: T, beta: T) -> T {
    let depth = T::of(depth as f64);
    beta * (T::one() - score / depth) + (T::one() - beta) * task_loss
}
