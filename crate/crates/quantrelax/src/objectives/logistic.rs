//! Binary logistic regression oracle.

use crate::error::{Error, Result};
use crate::objectives::{Dataset, EvalReport, GradientOracle, ParamGroup};

/// Standard logistic loss over a two-class dataset; parameters are
/// `[w (d, quantized), b (1, full precision)]`. Weight decay is not part of
/// the loss: it lives in the optimizer.
#[derive(Debug, Clone)]
pub struct LogisticOracle {
    data: Dataset,
}

pub fn make_logistic(data: Dataset) -> Result<LogisticOracle> {
    if data.num_classes() != 2 {
        return Err(Error::InvalidInput(format!(
            "logistic oracle requires exactly 2 classes, got {}",
            data.num_classes()
        )));
    }
    Ok(LogisticOracle { data })
}

impl LogisticOracle {
    fn margin(&self, x: &[f64], features: &[f64], label: u32) -> f64 {
        let d = self.data.num_features();
        let z: f64 = x[..d].iter().zip(features).map(|(w, f)| w * f).sum::<f64>() + x[d];
        let sign = if label == 1 { 1.0 } else { -1.0 };
        sign * z
    }

    /// `ln(1 + exp(-m))` without overflow for large negative margins.
    fn loss_from_margin(m: f64) -> f64 {
        if m > 0.0 {
            (-m).exp().ln_1p()
        } else {
            -m + m.exp().ln_1p()
        }
    }

    fn mean_loss(&self, x: &[f64], data: &Dataset) -> f64 {
        let n = data.len();
        (0..n)
            .map(|j| Self::loss_from_margin(self.margin_on(x, data, j)))
            .sum::<f64>()
            / n as f64
    }

    fn margin_on(&self, x: &[f64], data: &Dataset, j: usize) -> f64 {
        let d = data.num_features();
        let z: f64 = x[..d]
            .iter()
            .zip(data.row(j))
            .map(|(w, f)| w * f)
            .sum::<f64>()
            + x[d];
        let sign = if data.label(j) == 1 { 1.0 } else { -1.0 };
        sign * z
    }
}

impl GradientOracle for LogisticOracle {
    fn dim(&self) -> usize {
        self.data.num_features() + 1
    }

    fn num_samples(&self) -> usize {
        self.data.len()
    }

    fn param_groups(&self) -> Vec<ParamGroup> {
        let d = self.data.num_features();
        vec![
            ParamGroup {
                name: "w",
                range: 0..d,
                quantize: true,
            },
            ParamGroup {
                name: "b",
                range: d..d + 1,
                quantize: false,
            },
        ]
    }

    fn initial_params(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn stochastic_grad(&self, x: &[f64], batch: &[usize]) -> Vec<f64> {
        let d = self.data.num_features();
        let mut grad = vec![0.0; d + 1];
        if batch.is_empty() {
            return grad;
        }
        let inv = 1.0 / batch.len() as f64;
        for &j in batch {
            let m = self.margin(x, self.data.row(j), self.data.label(j));
            // d/dz ln(1+exp(-sign*z)) = -sign * sigmoid(-sign*z)
            let sign = if self.data.label(j) == 1 { 1.0 } else { -1.0 };
            let coeff = -sign * inv / (1.0 + m.exp());
            for (g, f) in grad[..d].iter_mut().zip(self.data.row(j)) {
                *g += coeff * f;
            }
            grad[d] += coeff;
        }
        grad
    }

    fn full_loss(&self, x: &[f64]) -> f64 {
        self.mean_loss(x, &self.data)
    }

    fn eval_on(&self, x: &[f64], data: &Dataset) -> Option<EvalReport> {
        if data.num_features() != self.data.num_features() || data.num_classes() != 2 {
            return None;
        }
        let d = data.num_features();
        let mut correct = 0usize;
        for j in 0..data.len() {
            let z: f64 = x[..d]
                .iter()
                .zip(data.row(j))
                .map(|(w, f)| w * f)
                .sum::<f64>()
                + x[d];
            let predicted = u32::from(z >= 0.0);
            if predicted == data.label(j) {
                correct += 1;
            }
        }
        Some(EvalReport {
            loss: self.mean_loss(x, data),
            accuracy: correct as f64 / data.len() as f64,
        })
    }
}
