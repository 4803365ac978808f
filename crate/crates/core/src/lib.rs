//! Debiasing of face-analysis embeddings, dataset diversity indices and
//! demographic bias audits.

pub mod attribute;
pub mod audit;
pub mod binning;
pub mod boxtrack;
pub mod dataset;
pub mod debias;
pub mod diversity;
pub mod error;
pub mod synth;

pub use error::{Error, Result};
