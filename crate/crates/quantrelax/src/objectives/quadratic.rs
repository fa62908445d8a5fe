//! Separable quadratic objective, the analysis testbed.

use crate::error::{Error, Result};
use crate::objectives::{Dataset, EvalReport, GradientOracle, ParamGroup};

/// `f(x) = 1/2 sum_i diag_i (x_i - c_i)^2`.
///
/// Minibatches subsample coordinates, scaled by `n / |batch|` so the
/// expectation over uniform batches equals the full gradient.
#[derive(Debug, Clone)]
pub struct QuadraticOracle {
    center: Vec<f64>,
    diag: Vec<f64>,
}

pub fn make_quadratic(center: Vec<f64>, diag: Option<Vec<f64>>) -> Result<QuadraticOracle> {
    if center.is_empty() {
        return Err(Error::EmptyInput);
    }
    if center.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("center must be finite".into()));
    }
    let diag = diag.unwrap_or_else(|| vec![1.0; center.len()]);
    if diag.len() != center.len() {
        return Err(Error::DimMismatch {
            expected: center.len(),
            got: diag.len(),
            context: "quadratic diag vs center",
        });
    }
    if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::InvalidInput("diag entries must be positive".into()));
    }
    Ok(QuadraticOracle { center, diag })
}

impl QuadraticOracle {
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

impl GradientOracle for QuadraticOracle {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn num_samples(&self) -> usize {
        self.center.len()
    }

    fn param_groups(&self) -> Vec<ParamGroup> {
        vec![ParamGroup {
            name: "x",
            range: 0..self.center.len(),
            quantize: true,
        }]
    }

    fn initial_params(&self) -> Vec<f64> {
        vec![0.0; self.center.len()]
    }

    fn stochastic_grad(&self, x: &[f64], batch: &[usize]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.center.len());
        let mut grad = vec![0.0; x.len()];
        if batch.is_empty() {
            return grad;
        }
        let scale = self.center.len() as f64 / batch.len() as f64;
        for &i in batch {
            grad[i] += scale * self.diag[i] * (x[i] - self.center[i]);
        }
        grad
    }

    fn full_loss(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(&self.center)
            .zip(&self.diag)
            .map(|((xi, ci), di)| di * (xi - ci) * (xi - ci))
            .sum::<f64>()
    }

    fn eval_on(&self, _x: &[f64], _data: &Dataset) -> Option<EvalReport> {
        None
    }

    fn full_grad(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.center)
            .zip(&self.diag)
            .map(|((xi, ci), di)| di * (xi - ci))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{finite_difference_grad, grad_close};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn loss_example() {
        let q = make_quadratic(vec![1.0, 0.2], None).unwrap();
        assert!((q.full_loss(&[0.0, 0.0]) - 0.52).abs() < 1e-15);
    }

    #[test]
    fn gradient_zero_at_center() {
        let q = make_quadratic(vec![1.0, 0.2], None).unwrap();
        let g = q.full_grad(&[1.0, 0.2]);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_nonpositive_diag() {
        assert!(make_quadratic(vec![1.0], Some(vec![0.0])).is_err());
        assert!(make_quadratic(vec![1.0], Some(vec![-1.0])).is_err());
    }

    #[test]
    fn full_batch_matches_finite_differences() {
        let q = make_quadratic(vec![1.0, -2.0, 0.5], Some(vec![2.0, 0.5, 3.0])).unwrap();
        let x = [0.3, 0.1, -0.7];
        let all: Vec<usize> = (0..3).collect();
        let g = q.stochastic_grad(&x, &all);
        assert!(grad_close(&g, &q.full_grad(&x), 1e-14));
        let fd = finite_difference_grad(&q, &x, 1e-6);
        assert!(grad_close(&g, &fd, 1e-8));
    }

    #[test]
    fn minibatch_unbiased_monte_carlo() {
        let n = 6;
        let q = make_quadratic((0..n).map(|i| i as f64 * 0.3 - 1.0).collect(), None).unwrap();
        let x: Vec<f64> = (0..n).map(|i| 0.1 * i as f64).collect();
        let full = q.full_grad(&x);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 100_000;
        let mut mean = vec![0.0; n];
        let mut indices: Vec<usize> = (0..n).collect();
        for _ in 0..trials {
            indices.shuffle(&mut rng);
            let k = rng.gen_range(1..=n);
            let g = q.stochastic_grad(&x, &indices[..k]);
            for (m, gi) in mean.iter_mut().zip(&g) {
                *m += gi / trials as f64;
            }
        }
        // 3 sigma / sqrt(trials) with per-coordinate sigma bounded by the
        // largest single-coordinate magnitude times n.
        let sigma_bound = 3.0 * n as f64 / (trials as f64).sqrt();
        for (m, f) in mean.iter().zip(&full) {
            assert!((m - f).abs() <= sigma_bound, "bias {m} vs {f}");
        }
    }
}
