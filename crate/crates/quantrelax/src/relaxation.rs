//! Moreau-envelope relaxation of the quantization constraint.
//!
//! The envelope of the indicator of `Q` is `(lambda/2) * dist(x, Q)^2`; its
//! proximal step is a closed-form linear interpolation between a point and
//! its projection. A geometric continuation schedule grows `lambda` over
//! training so iterates drift toward `Q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::{self, QuantScheme, QuantizedPoint};

/// Continuation schedule: `lambda` starts at `lambda0` and is multiplied by
/// `rho` once per completed cadence tick (measured in epochs, fractional
/// cadences allowed). Phase II (exact quantization) starts at epoch
/// `phase2_epoch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationSchedule {
    pub lambda0: f64,
    pub rho: f64,
    /// Epochs between growth ticks; 1.0 grows once per epoch, 0.5 twice.
    pub cadence_epochs: f64,
    /// First epoch (0-based) of the exact-quantization phase.
    pub phase2_epoch: usize,
}

impl Default for RelaxationSchedule {
    /// The settings used for the 300-epoch CIFAR-style runs: `lambda0 = 1`,
    /// `rho = 1.02` per epoch, phase II from epoch 240.
    fn default() -> Self {
        Self {
            lambda0: 1.0,
            rho: 1.02,
            cadence_epochs: 1.0,
            phase2_epoch: 240,
        }
    }
}

impl RelaxationSchedule {
    pub fn new(lambda0: f64, rho: f64, cadence_epochs: f64, phase2_epoch: usize) -> Result<Self> {
        let s = Self {
            lambda0,
            rho,
            cadence_epochs,
            phase2_epoch,
        };
        s.validate()?;
        Ok(s)
    }

    /// Engine-level validity. `rho = 1` and `phase2_epoch = 0` are degenerate
    /// but legal: they reduce the scheme to plain BinaryConnect behavior and
    /// are exercised by the reduction identities.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0) || !self.lambda0.is_finite() {
            return Err(Error::InvalidInput(
                "lambda0 must be positive and finite".into(),
            ));
        }
        if !(self.rho >= 1.0) || !self.rho.is_finite() {
            return Err(Error::InvalidInput("rho must be >= 1".into()));
        }
        if !(self.cadence_epochs > 0.0) {
            return Err(Error::InvalidInput("cadence must be positive".into()));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> LambdaState {
        LambdaState {
            lambda: self.lambda0,
            epochs_elapsed: 0.0,
        }
    }
}

/// Current relaxation weight plus the elapsed-epoch accounting that drives
/// the growth ticks. `lambda` is stored as the sequential product of `rho`
/// factors, so a resumed state reproduces the original trajectory exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaState {
    pub lambda: f64,
    pub epochs_elapsed: f64,
}

/// Slack absorbing accumulated rounding when elapsed epochs are summed from
/// per-batch fractions; far below any realistic batch fraction.
const TICK_EPS: f64 = 1e-9;

/// Advances elapsed-epoch accounting by `epochs_delta`, multiplying `lambda`
/// by `rho` once per completed cadence tick.
pub fn advance_lambda(
    schedule: &RelaxationSchedule,
    state: LambdaState,
    epochs_delta: f64,
) -> Result<LambdaState> {
    if !(epochs_delta >= 0.0) {
        return Err(Error::InvalidInput(
            "epochs_delta must be nonnegative".into(),
        ));
    }
    let before = ((state.epochs_elapsed + TICK_EPS) / schedule.cadence_epochs).floor() as u64;
    let elapsed = state.epochs_elapsed + epochs_delta;
    let after = ((elapsed + TICK_EPS) / schedule.cadence_epochs).floor() as u64;
    let mut lambda = state.lambda;
    for _ in before..after {
        lambda *= schedule.rho;
    }
    Ok(LambdaState {
        lambda,
        epochs_elapsed: elapsed,
    })
}

/// Proximal step of `(lambda/2) dist(., Q)^2`: the minimizer of
/// `1/2 ||x - y||^2 + (lambda/2) dist(x, Q)^2`, given in closed form by
/// `(lambda * proj_Q(y) + y) / (lambda + 1)`.
pub fn relaxed_prox(y: &[f64], lambda: f64, scheme: &QuantScheme) -> Result<Vec<f64>> {
    let projection = quantizer::project(y, scheme)?;
    relaxed_prox_from_projection(y, lambda, &projection)
}

/// Same as [`relaxed_prox`] with the projection already computed.
pub fn relaxed_prox_from_projection(
    y: &[f64],
    lambda: f64,
    projection: &QuantizedPoint,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(
            "lambda must be positive and finite".into(),
        ));
    }
    Ok(y.iter()
        .zip(projection.materialized())
        .map(|(&yi, &pi)| (lambda * pi + yi) / (lambda + 1.0))
        .collect())
}

/// Moreau envelope of the indicator of `Q`: `(lambda/2) * dist(x, Q)^2`.
pub fn envelope_value(x: &[f64], lambda: f64, scheme: &QuantScheme) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(
            "lambda must be positive and finite".into(),
        ));
    }
    let d = quantizer::dist_to_q(x, scheme)?;
    Ok(0.5 * lambda * d * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::GroupLayout;

    fn binary2() -> QuantScheme {
        QuantScheme::binary(GroupLayout::single(2).unwrap())
    }

    fn ternary2() -> QuantScheme {
        QuantScheme::ternary(GroupLayout::single(2).unwrap())
    }

    #[test]
    fn prox_is_midpoint_at_lambda_one() {
        let x = relaxed_prox(&[2.0, -4.0], 1.0, &binary2()).unwrap();
        assert_eq!(x, vec![2.5, -3.5]);
    }

    #[test]
    fn prox_limits() {
        let y = [1.3, -0.4];
        let x = relaxed_prox(&y, 1e-12, &binary2()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
        let proj = quantizer::project(&y, &binary2()).unwrap();
        let x = relaxed_prox(&y, 1e9, &binary2()).unwrap();
        for (a, b) in x.iter().zip(proj.materialized()) {
            assert!((a - b).abs() < 1e-6 * b.abs().max(1.0));
        }
    }

    #[test]
    fn prox_rejects_bad_lambda() {
        assert!(relaxed_prox(
            &[1.0],
            0.0,
            &QuantScheme::binary(GroupLayout::single(1).unwrap())
        )
        .is_err());
        assert!(relaxed_prox(
            &[1.0],
            f64::INFINITY,
            &QuantScheme::binary(GroupLayout::single(1).unwrap())
        )
        .is_err());
    }

    #[test]
    fn envelope_examples() {
        // x in Q.
        assert_eq!(envelope_value(&[2.0, 2.0], 5.0, &ternary2()).unwrap(), 0.0);
        // dist([3,1], Q) = 1 under exact ternarization.
        let v = envelope_value(&[3.0, 1.0], 2.0, &ternary2()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        // Linear in lambda.
        let v1 = envelope_value(&[3.0, 1.0], 2.0, &ternary2()).unwrap();
        let v2 = envelope_value(&[3.0, 1.0], 4.0, &ternary2()).unwrap();
        assert!((v2 - 2.0 * v1).abs() < 1e-15);
    }

    #[test]
    fn lambda_growth_240_epochs() {
        let schedule = RelaxationSchedule::default();
        let mut state = schedule.initial_state();
        for _ in 0..240 {
            state = advance_lambda(&schedule, state, 1.0).unwrap();
        }
        assert!(state.lambda > 100.0 && state.lambda < 200.0);
        assert!((state.lambda - 1.02f64.powi(240)).abs() < 1e-9 * state.lambda);
        assert!((state.lambda - 115.8887).abs() < 1e-3);
    }

    #[test]
    fn lambda_half_epoch_cadence() {
        let schedule = RelaxationSchedule::new(1.0, 1.045, 0.5, 44).unwrap();
        let mut state = schedule.initial_state();
        // 55 epochs advanced in tenths: 110 ticks.
        for _ in 0..550 {
            state = advance_lambda(&schedule, state, 0.1).unwrap();
        }
        assert!((state.lambda - 1.045f64.powi(110)).abs() < 1e-6 * state.lambda);
        assert!((state.lambda - 126.8).abs() < 0.1);
    }

    #[test]
    fn lambda_zero_delta_is_identity() {
        let schedule = RelaxationSchedule::default();
        let state = LambdaState {
            lambda: 3.5,
            epochs_elapsed: 7.25,
        };
        let next = advance_lambda(&schedule, state, 0.0).unwrap();
        assert_eq!(next, state);
    }

    #[test]
    fn fractional_accumulation_hits_every_tick() {
        // 7 batches per epoch accumulates rounding; the tick guard absorbs it.
        let schedule = RelaxationSchedule::new(1.0, 2.0, 1.0, 100).unwrap();
        let mut state = schedule.initial_state();
        for _ in 0..(7 * 10) {
            state = advance_lambda(&schedule, state, 1.0 / 7.0).unwrap();
        }
        assert_eq!(state.lambda, 1024.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(RelaxationSchedule::new(0.0, 1.02, 1.0, 10).is_err());
        assert!(RelaxationSchedule::new(1.0, 0.99, 1.0, 10).is_err());
        assert!(RelaxationSchedule::new(1.0, 1.02, 0.0, 10).is_err());
        // Degenerate but legal: no growth, immediate phase II.
        assert!(RelaxationSchedule::new(1.0, 1.0, 1.0, 0).is_ok());
    }
}
