//! Performance estimation: representation similarity, single-batch surrogate
//! training, and tabular accuracy lookup.

pub mod similarity;
pub mod surrogate;

pub use similarity::{combined_loss, layer_term, layer_term_with_grad, layer_terms, rmi_score, FeatureStack};
pub use surrogate::{
    synth_forward, train_single_batch, Gradient, ReferenceModel, SurrogateEdge, SurrogateNet, SurrogateTask,
    TrainSettings, Trained,
};

use crate::error::Result;
use crate::genotype::Genotype;
use crate::harness::bench::{BenchTable, Dataset};

/// Stored test accuracy (percent) of `g` on `dataset`.
pub fn tabular_accuracy(table: &BenchTable, g: &Genotype, dataset: Dataset) -> Result<f64> {
    Ok(table.row(g)?.accuracy(dataset))
}
