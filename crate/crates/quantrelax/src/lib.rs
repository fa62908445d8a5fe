//! Two-phase training of weight-quantized models via Moreau-envelope
//! relaxation.
//!
//! The constraint set `Q = R+ x {±q_1,...,±q_m}^n` (a scale times a discrete
//! code vector, geometrically a union of lines through the origin) is not
//! imposed directly during the first training phase. Instead its indicator
//! is relaxed to the envelope `(lambda/2) dist(x, Q)^2`, whose proximal step
//! is a closed-form blend of the float weights and their quantization, and
//! `lambda` grows geometrically until the second phase switches to exact
//! projection.
//!
//! Modules:
//! - [`quantizer`]: exact/approximate projections onto `Q` plus a
//!   brute-force oracle.
//! - [`relaxation`]: envelope values, the relaxed proximal step, and the
//!   `lambda` continuation schedule.
//! - [`objectives`]: gradient-oracle contract with quadratic, logistic and
//!   MLP instances, dataset generation and ingestion.
//! - [`optimizers`]: PSGD, BinaryConnect and BinaryRelax steps plus the
//!   epoch-driven training harness.
//! - [`diagnostics`]: approximate-orthogonality constants, minimum line
//!   angles, stationarity proxies, and the descent check.
//! - [`verify`]: fast named property checks intended for CI.

// Validations are written as `!(x > 0.0)` so NaN takes the error path;
// rewriting them as `x <= 0.0` would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod objectives;
pub mod optimizers;
pub mod quantizer;
pub mod relaxation;
pub mod seed;
pub mod verify;

pub use error::{Error, Result};
