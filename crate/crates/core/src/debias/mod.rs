//! Adversarial linear decomposition of embeddings.
//!
//! An embedding `z` is split into a task component `z_p = A B z` and one
//! component `z_i = D_i T_i B z` per sensitive attribute. The main player
//! `V = {A, B, D_i, W_p}` keeps `z_p` predictive of the primary label, keeps
//! the decomposition faithful and orthogonal, and maximizes the entropy of the
//! adversary heads. The adversary `U = {T_i, W_i}` tries to predict each
//! sensitive attribute from `T_i B z`.

mod grad;
mod loss;
mod model;
mod probe;
mod train;

use ndarray::Array2;

use crate::dataset::{Dataset, EmbeddingRecord};
use crate::error::{Error, Result};

pub use grad::{grad_adv, grad_main, AdvGrad, BranchGrad, MainGrad};
pub use loss::{
    forward, forward_batch, log_softmax, loss_cls, loss_decom, loss_entropy, loss_or,
    objective_adv, objective_main, softmax, BatchForward, ForwardState, LossTerms,
};
pub use model::{Branch, DebiasModel, Dims, Matrix, ModelFile, MODEL_VERSION};
pub use probe::{adversary_probe, chance_accuracy, ProbeConfig};
pub use train::{epoch_order, train, train_from, EpochLosses, History, Hyperparams};

/// A labeled mini-batch: embeddings as rows plus the primary labels and one
/// label vector per sensitive attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub z: Array2<f64>,
    pub y_p: Vec<usize>,
    /// `y_sens[i][n]` is the label of attribute `i` for row `n`.
    pub y_sens: Vec<Vec<usize>>,
}

impl Batch {
    pub fn from_records<'a, I>(records: I, d1: usize, n_sensitive: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a EmbeddingRecord>,
    {
        let mut data = Vec::new();
        let mut y_p = Vec::new();
        let mut y_sens = vec![Vec::new(); n_sensitive];
        for r in records {
            if r.z.len() != d1 || r.y_sens.len() != n_sensitive {
                return Err(Error::Dimension(format!(
                    "record '{}' does not match d1 = {d1}, N = {n_sensitive}",
                    r.id
                )));
            }
            data.extend_from_slice(&r.z);
            y_p.push(r.y_p);
            for (col, &y) in y_sens.iter_mut().zip(&r.y_sens) {
                col.push(y);
            }
        }
        let z = Array2::from_shape_vec((y_p.len(), d1), data)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Ok(Self { z, y_p, y_sens })
    }

    pub fn from_dataset(dataset: &Dataset, rows: &[usize]) -> Result<Self> {
        let records = dataset.records();
        let schema = dataset.schema();
        Self::from_records(rows.iter().map(|&i| &records[i]), schema.d1, schema.n_sensitive())
    }

    pub fn len(&self) -> usize {
        self.y_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_p.is_empty()
    }
}

/// `A B z` for every record, keeping ids, labels and metadata.
pub fn debias_dataset(model: &DebiasModel, dataset: &Dataset) -> Result<Dataset> {
    dataset.map_embeddings(|z| Ok(model.transform(ndarray::ArrayView1::from(z))?.to_vec()))
}

/// Single-vector form of [`DebiasModel::transform`].
pub fn debias_transform(model: &DebiasModel, z: &[f64]) -> Result<Vec<f64>> {
    Ok(model.transform(ndarray::ArrayView1::from(z))?.to_vec())
}
