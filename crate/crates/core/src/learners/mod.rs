//! Incremental binary classifiers.

mod hoeffding;
mod logistic;

pub use hoeffding::{hoeffding_bound, HoeffdingTree, HoeffdingTreeParams, LeafPrediction};
pub use logistic::LogisticModel;

use crate::dataspace::{DataError, OnlineScaler, ScalerKind};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("feature {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("label {0} is not binary")]
    NonBinaryLabel(u8),
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A binary classifier trained one instance at a time.
pub trait OnlineClassifier: Send {
    fn learn_one(&mut self, x: &[f64], y: u8) -> Result<(), ModelError>;

    /// Probability of class 1. Must not change the model.
    fn predict_proba_one(&self, x: &[f64]) -> f64;

    fn predict_one(&self, x: &[f64]) -> u8 {
        u8::from(self.predict_proba_one(x) >= 0.5)
    }

    /// Deterministic estimate of the model's size in bytes.
    fn memory_bytes(&self) -> usize;
}

impl<T: OnlineClassifier + ?Sized> OnlineClassifier for Box<T> {
    fn learn_one(&mut self, x: &[f64], y: u8) -> Result<(), ModelError> {
        (**self).learn_one(x, y)
    }

    fn predict_proba_one(&self, x: &[f64]) -> f64 {
        (**self).predict_proba_one(x)
    }

    fn memory_bytes(&self) -> usize {
        (**self).memory_bytes()
    }
}

pub(crate) fn check_instance(x: &[f64], y: u8, dim: Option<usize>) -> Result<(), ModelError> {
    if y > 1 {
        return Err(ModelError::NonBinaryLabel(y));
    }
    if let Some(d) = dim {
        if d != x.len() {
            return Err(ModelError::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
    }
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(ModelError::NonFinite { index, value });
    }
    Ok(())
}

/// A scaler in front of a classifier. Learning updates the scaler first and
/// feeds the scaled instance to the model; prediction only transforms.
pub struct Scaled<M> {
    scaler: OnlineScaler,
    model: M,
}

impl<M: OnlineClassifier> Scaled<M> {
    pub fn new(kind: ScalerKind, model: M) -> Self {
        Self {
            scaler: OnlineScaler::new(kind),
            model,
        }
    }

    pub fn model(&self) -> &M {
        &self.model
    }
}

impl<M: OnlineClassifier> OnlineClassifier for Scaled<M> {
    fn learn_one(&mut self, x: &[f64], y: u8) -> Result<(), ModelError> {
        check_instance(x, y, None)?;
        let z = self.scaler.learn_transform(x).map_err(|e| match e {
            DataError::DimensionMismatch { expected, found } => {
                ModelError::DimensionMismatch { expected, found }
            }
            other => unreachable!("scaler only fails on dimension: {other}"),
        })?;
        self.model.learn_one(&z, y)
    }

    fn predict_proba_one(&self, x: &[f64]) -> f64 {
        self.model.predict_proba_one(&self.scaler.transform(x))
    }

    fn memory_bytes(&self) -> usize {
        self.model.memory_bytes() + self.scaler.memory_bytes()
    }
}
