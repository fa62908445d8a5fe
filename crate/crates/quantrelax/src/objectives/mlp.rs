//! One-hidden-layer MLP with softmax cross-entropy and manual
//! backpropagation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{Dataset, EvalReport, GradientOracle, ParamGroup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    ReLU,
    Tanh,
}

/// Shape of the network. Parameters are laid out flat as
/// `[W1 (d x H) | b1 (H) | W2 (H x C) | b2 (C)]`; the linear-layer weights
/// `W1` and `W2` are the quantized groups, biases stay full-precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpLayout {
    pub input_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub activation: Activation,
}

impl MlpLayout {
    pub fn param_count(&self) -> usize {
        self.input_dim * self.hidden + self.hidden + self.hidden * self.classes + self.classes
    }

    fn w1(&self) -> std::ops::Range<usize> {
        0..self.input_dim * self.hidden
    }

    fn b1(&self) -> std::ops::Range<usize> {
        let s = self.input_dim * self.hidden;
        s..s + self.hidden
    }

    fn w2(&self) -> std::ops::Range<usize> {
        let s = self.input_dim * self.hidden + self.hidden;
        s..s + self.hidden * self.classes
    }

    fn b2(&self) -> std::ops::Range<usize> {
        let s = self.input_dim * self.hidden + self.hidden + self.hidden * self.classes;
        s..s + self.classes
    }
}

#[derive(Debug, Clone)]
pub struct MlpOracle {
    layout: MlpLayout,
    data: Dataset,
    seed: u64,
}

pub fn make_mlp(layout: MlpLayout, data: Dataset, seed: u64) -> Result<MlpOracle> {
    if layout.input_dim == 0 || layout.hidden == 0 || layout.classes < 2 {
        return Err(Error::InvalidInput(
            "MLP layout dimensions must be positive, classes >= 2".into(),
        ));
    }
    if data.num_features() != layout.input_dim {
        return Err(Error::DimMismatch {
            expected: layout.input_dim,
            got: data.num_features(),
            context: "dataset features vs MLP input",
        });
    }
    if data.num_classes() > layout.classes {
        return Err(Error::DimMismatch {
            expected: layout.classes,
            got: data.num_classes(),
            context: "dataset classes vs MLP output",
        });
    }
    Ok(MlpOracle { layout, data, seed })
}

impl MlpOracle {
    pub fn layout(&self) -> MlpLayout {
        self.layout
    }

    /// Forward pass for one sample; returns hidden pre-activations, hidden
    /// activations and output logits.
    fn forward(&self, x: &[f64], features: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let l = &self.layout;
        let w1 = &x[l.w1()];
        let b1 = &x[l.b1()];
        let w2 = &x[l.w2()];
        let b2 = &x[l.b2()];

        let mut z1 = b1.to_vec();
        for (i, &f) in features.iter().enumerate() {
            if f != 0.0 {
                let row = &w1[i * l.hidden..(i + 1) * l.hidden];
                for (z, w) in z1.iter_mut().zip(row) {
                    *z += f * w;
                }
            }
        }
        let a1: Vec<f64> = match l.activation {
            Activation::ReLU => z1.iter().map(|&z| z.max(0.0)).collect(),
            Activation::Tanh => z1.iter().map(|&z| z.tanh()).collect(),
        };
        let mut z2 = b2.to_vec();
        for (h, &a) in a1.iter().enumerate() {
            if a != 0.0 {
                let row = &w2[h * l.classes..(h + 1) * l.classes];
                for (z, w) in z2.iter_mut().zip(row) {
                    *z += a * w;
                }
            }
        }
        (z1, a1, z2)
    }

    /// Numerically stable `-log softmax(z)[label]` plus the softmax vector.
    fn cross_entropy(z2: &[f64], label: u32) -> (f64, Vec<f64>) {
        let max = z2.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = z2.iter().map(|&z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let log_sum = sum.ln() + max;
        let loss = log_sum - z2[label as usize];
        let softmax = exps.iter().map(|&e| e / sum).collect();
        (loss, softmax)
    }

    fn mean_loss(&self, x: &[f64], data: &Dataset) -> f64 {
        let mut total = 0.0;
        for j in 0..data.len() {
            let (_, _, z2) = self.forward(x, data.row(j));
            total += Self::cross_entropy(&z2, data.label(j)).0;
        }
        total / data.len() as f64
    }
}

impl GradientOracle for MlpOracle {
    fn dim(&self) -> usize {
        self.layout.param_count()
    }

    fn num_samples(&self) -> usize {
        self.data.len()
    }

    fn param_groups(&self) -> Vec<ParamGroup> {
        let l = &self.layout;
        vec![
            ParamGroup {
                name: "w1",
                range: l.w1(),
                quantize: true,
            },
            ParamGroup {
                name: "b1",
                range: l.b1(),
                quantize: false,
            },
            ParamGroup {
                name: "w2",
                range: l.w2(),
                quantize: true,
            },
            ParamGroup {
                name: "b2",
                range: l.b2(),
                quantize: false,
            },
        ]
    }

    /// Glorot-uniform weights from the oracle's seed, zero biases.
    fn initial_params(&self) -> Vec<f64> {
        let l = &self.layout;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut x = vec![0.0; l.param_count()];
        let bound1 = (6.0 / (l.input_dim + l.hidden) as f64).sqrt();
        for i in l.w1() {
            x[i] = rng.gen_range(-bound1..bound1);
        }
        let bound2 = (6.0 / (l.hidden + l.classes) as f64).sqrt();
        for i in l.w2() {
            x[i] = rng.gen_range(-bound2..bound2);
        }
        x
    }

    fn stochastic_grad(&self, x: &[f64], batch: &[usize]) -> Vec<f64> {
        let l = &self.layout;
        let mut grad = vec![0.0; l.param_count()];
        if batch.is_empty() {
            return grad;
        }
        let inv = 1.0 / batch.len() as f64;
        let w2 = &x[l.w2()];
        let (gw1, rest) = grad.split_at_mut(l.b1().start);
        let (gb1, rest) = rest.split_at_mut(l.hidden);
        let (gw2, gb2) = rest.split_at_mut(l.hidden * l.classes);

        for &j in batch {
            let features = self.data.row(j);
            let (z1, a1, z2) = self.forward(x, features);
            let (_, mut dz2) = Self::cross_entropy(&z2, self.data.label(j));
            dz2[self.data.label(j) as usize] -= 1.0;

            for (g, d) in gb2.iter_mut().zip(&dz2) {
                *g += inv * d;
            }
            let mut da1 = vec![0.0; l.hidden];
            for h in 0..l.hidden {
                let row = &w2[h * l.classes..(h + 1) * l.classes];
                let grow = &mut gw2[h * l.classes..(h + 1) * l.classes];
                let a = a1[h];
                let mut acc = 0.0;
                for ((g, w), d) in grow.iter_mut().zip(row).zip(&dz2) {
                    *g += inv * a * d;
                    acc += w * d;
                }
                da1[h] = acc;
            }
            let dz1: Vec<f64> = match l.activation {
                Activation::ReLU => da1
                    .iter()
                    .zip(&z1)
                    .map(|(&d, &z)| if z > 0.0 { d } else { 0.0 })
                    .collect(),
                Activation::Tanh => da1
                    .iter()
                    .zip(&a1)
                    .map(|(&d, &a)| d * (1.0 - a * a))
                    .collect(),
            };
            for (g, d) in gb1.iter_mut().zip(&dz1) {
                *g += inv * d;
            }
            for (i, &f) in features.iter().enumerate() {
                if f != 0.0 {
                    let grow = &mut gw1[i * l.hidden..(i + 1) * l.hidden];
                    for (g, d) in grow.iter_mut().zip(&dz1) {
                        *g += inv * f * d;
                    }
                }
            }
        }
        grad
    }

    fn full_loss(&self, x: &[f64]) -> f64 {
        self.mean_loss(x, &self.data)
    }

    fn eval_on(&self, x: &[f64], data: &Dataset) -> Option<EvalReport> {
        if data.num_features() != self.layout.input_dim || data.num_classes() > self.layout.classes
        {
            return None;
        }
        let mut correct = 0usize;
        let mut total_loss = 0.0;
        for j in 0..data.len() {
            let (_, _, z2) = self.forward(x, data.row(j));
            total_loss += Self::cross_entropy(&z2, data.label(j)).0;
            // argmax with ties toward the lowest class index
            let mut best = 0usize;
            for (c, &z) in z2.iter().enumerate() {
                if z > z2[best] {
                    best = c;
                }
            }
            if best as u32 == data.label(j) {
                correct += 1;
            }
        }
        Some(EvalReport {
            loss: total_loss / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{finite_difference_grad, grad_close};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_dataset(seed: u64, n: usize, d: usize, classes: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let labels: Vec<u32> = (0..n).map(|i| (i % classes) as u32).collect();
        Dataset::new(features, d, labels, classes).unwrap()
    }

    #[test]
    fn layout_param_count() {
        let l = MlpLayout {
            input_dim: 2,
            hidden: 16,
            classes: 3,
            activation: Activation::ReLU,
        };
        assert_eq!(l.param_count(), 2 * 16 + 16 + 16 * 3 + 3);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let l = MlpLayout {
            input_dim: 3,
            hidden: 4,
            classes: 2,
            activation: Activation::ReLU,
        };
        let data = small_dataset(1, 10, 2, 2);
        assert!(make_mlp(l, data, 0).is_err());
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let l = MlpLayout {
            input_dim: 2,
            hidden: 8,
            classes: 3,
            activation: Activation::Tanh,
        };
        let oracle = make_mlp(l, small_dataset(2, 12, 2, 3), 44).unwrap();
        let a = oracle.initial_params();
        let b = oracle.initial_params();
        assert_eq!(a, b);
        let bound1 = (6.0 / (2 + 8) as f64).sqrt();
        assert!(a[l.w1()].iter().all(|w| w.abs() <= bound1));
        assert!(a[l.b1()].iter().all(|&w| w == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences_tanh() {
        let l = MlpLayout {
            input_dim: 3,
            hidden: 5,
            classes: 3,
            activation: Activation::Tanh,
        };
        let oracle = make_mlp(l, small_dataset(3, 20, 3, 3), 7).unwrap();
        let x = oracle.initial_params();
        let g = oracle.full_grad(&x);
        let fd = finite_difference_grad(&oracle, &x, 1e-6);
        assert!(grad_close(&g, &fd, 1e-6));
    }

    #[test]
    fn gradient_matches_finite_differences_relu() {
        let l = MlpLayout {
            input_dim: 3,
            hidden: 5,
            classes: 3,
            activation: Activation::ReLU,
        };
        let oracle = make_mlp(l, small_dataset(4, 20, 3, 3), 9).unwrap();
        let x = oracle.initial_params();
        let g = oracle.full_grad(&x);
        let fd = finite_difference_grad(&oracle, &x, 1e-6);
        assert!(grad_close(&g, &fd, 1e-4));
    }

    #[test]
    fn zero_features_give_zero_w1_gradient() {
        let l = MlpLayout {
            input_dim: 2,
            hidden: 4,
            classes: 2,
            activation: Activation::ReLU,
        };
        let data = Dataset::new(vec![0.0, 0.0, 0.0, 0.0], 2, vec![0, 1], 2).unwrap();
        let oracle = make_mlp(l, data, 3).unwrap();
        let g = oracle.full_grad(&oracle.initial_params());
        assert!(g[l.w1()].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hidden_unit_permutation_permutes_gradient_blocks() {
        let l = MlpLayout {
            input_dim: 2,
            hidden: 4,
            classes: 3,
            activation: Activation::Tanh,
        };
        let oracle = make_mlp(l, small_dataset(6, 15, 2, 3), 21).unwrap();
        let x = oracle.initial_params();
        let perm = [2usize, 0, 3, 1];

        let permute = |v: &[f64]| -> Vec<f64> {
            let mut out = v.to_vec();
            for i in 0..l.input_dim {
                for (h, &p) in perm.iter().enumerate() {
                    out[l.w1().start + i * l.hidden + h] = v[l.w1().start + i * l.hidden + p];
                }
            }
            for (h, &p) in perm.iter().enumerate() {
                out[l.b1().start + h] = v[l.b1().start + p];
                for c in 0..l.classes {
                    out[l.w2().start + h * l.classes + c] = v[l.w2().start + p * l.classes + c];
                }
            }
            out
        };

        let gx = oracle.full_grad(&x);
        let gpx = oracle.full_grad(&permute(&x));
        let expected = permute(&gx);
        assert!(grad_close(&gpx, &expected, 1e-12));
    }
}
