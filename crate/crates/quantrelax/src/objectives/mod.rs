//! Stochastic gradient oracles and desk-scale objectives.
//!
//! Every oracle supplies minibatch gradients evaluated at whatever parameter
//! vector it is handed (pseudo-quantized or float), full losses, and an
//! optional classification evaluation. Gradient evaluation is deterministic
//! given `(x, batch)`: oracles hold no hidden RNG.

mod data;
mod logistic;
mod mlp;
mod quadratic;

pub use data::{gen_blobs, load_checkpoint, load_csv, save_checkpoint, BlobSplit};
pub use logistic::{make_logistic, LogisticOracle};
pub use mlp::{make_mlp, Activation, MlpLayout, MlpOracle};
pub use quadratic::{make_quadratic, QuadraticOracle};

use crate::error::{Error, Result};

/// Labeled feature matrix. Features are row-major `N x d`; labels are class
/// ids in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    num_features: usize,
    labels: Vec<u32>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        num_features: usize,
        labels: Vec<u32>,
        num_classes: usize,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput(
                "dataset must contain at least one sample".into(),
            ));
        }
        if num_features == 0 || features.len() != labels.len() * num_features {
            return Err(Error::InvalidInput(format!(
                "feature matrix size {} does not match {} samples x {} features",
                features.len(),
                labels.len(),
                num_features
            )));
        }
        if num_classes < 2 {
            return Err(Error::InvalidInput(
                "dataset needs at least 2 classes".into(),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::InvalidInput(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(Self {
            features,
            num_features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }
}

/// A contiguous block of the parameter vector, marked for quantization or
/// kept full-precision (biases and other scale-like parameters).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamGroup {
    pub name: &'static str,
    pub range: std::ops::Range<usize>,
    pub quantize: bool,
}

/// Loss and accuracy of a parameter vector on a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub loss: f64,
    pub accuracy: f64,
}

/// Contract supplying stochastic gradients and losses for an objective.
pub trait GradientOracle: Send + Sync {
    /// Parameter count `n`.
    fn dim(&self) -> usize;

    /// Number of samples available for minibatching.
    fn num_samples(&self) -> usize;

    /// Parameter layout: which contiguous blocks are quantized.
    fn param_groups(&self) -> Vec<ParamGroup>;

    /// Deterministic seeded initialization.
    fn initial_params(&self) -> Vec<f64>;

    /// Gradient of the batch-averaged loss at `x`, evaluated on the given
    /// sample (or coordinate) indices. Over the full index set this equals
    /// the gradient of [`GradientOracle::full_loss`].
    fn stochastic_grad(&self, x: &[f64], batch: &[usize]) -> Vec<f64>;

    /// Loss over the oracle's bound data.
    fn full_loss(&self, x: &[f64]) -> f64;

    /// Loss and accuracy on an arbitrary dataset; `None` for objectives
    /// without a dataset/classification notion.
    fn eval_on(&self, x: &[f64], data: &Dataset) -> Option<EvalReport>;

    /// Full gradient: the stochastic gradient over every index.
    fn full_grad(&self, x: &[f64]) -> Vec<f64> {
        let all: Vec<usize> = (0..self.num_samples()).collect();
        self.stochastic_grad(x, &all)
    }
}

/// Central-difference gradient of `full_loss`, for verifying analytic
/// gradients. Lives beside the trait so every oracle checks against the
/// same independent reference.
pub fn finite_difference_grad(oracle: &dyn GradientOracle, x: &[f64], step: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + step;
        let fp = oracle.full_loss(&xp);
        xp[i] = orig - step;
        let fm = oracle.full_loss(&xp);
        xp[i] = orig;
        grad[i] = (fp - fm) / (2.0 * step);
    }
    grad
}

#[cfg(test)]
pub(crate) fn grad_close(a: &[f64], b: &[f64], rel_tol: f64) -> bool {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff <= rel_tol * scale.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![1.0, 2.0], 1, vec![0, 1], 2).is_ok());
        assert!(Dataset::new(vec![], 1, vec![], 2).is_err());
        assert!(Dataset::new(vec![1.0], 1, vec![3], 2).is_err());
        assert!(Dataset::new(vec![f64::NAN], 1, vec![0], 2).is_err());
        assert!(Dataset::new(vec![1.0], 1, vec![0], 1).is_err());
        assert!(Dataset::new(vec![1.0, 2.0, 3.0], 2, vec![0, 1], 2).is_err());
    }
}
