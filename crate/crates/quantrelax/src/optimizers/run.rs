//! Epoch-driven training harness producing per-epoch metrics.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diagnostics::{alpha_record, AlphaRecord};
use crate::error::{Error, Result};
use crate::objectives::{Dataset, GradientOracle};
use crate::optimizers::{
    binaryconnect_step, binaryrelax_step, float_step, lr_at, psgd_step, Hyperparams,
    LearningRateSchedule, ModelQuantizer, OptimizerKind, OptimizerState, Phase, RelaxStepSchedule,
    StepResult,
};
use crate::quantizer::QuantizedPoint;
use crate::relaxation::RelaxationSchedule;
use crate::seed::derive_seed;

/// Stream ids for per-purpose RNGs derived from the run seed.
const STREAM_SHUFFLE: u64 = 0;
const STREAM_SIGMA2: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseLabel {
    Relaxed,
    Exact,
    Float,
}

impl std::fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PhaseLabel::Relaxed => write!(f, "relaxed"),
            PhaseLabel::Exact => write!(f, "exact"),
            PhaseLabel::Float => write!(f, "float"),
        }
    }
}

/// One diagnostics row. Per-epoch rows aggregate the epoch's iterations;
/// optional per-iteration rows hold single-step values.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub iter: u64,
    pub phase: PhaseLabel,
    pub lambda: f64,
    pub gamma: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
    /// Distance of `x` to the quantization set; `None` for float runs.
    pub dist_to_q: Option<f64>,
    pub alpha_mean: Option<f64>,
    pub alpha_min: Option<f64>,
    pub alpha_undef_count: u64,
    /// Mean of `||x^{k+1}-x^k||^2 / gamma_k^2` over the covered iterations.
    pub stationarity_proxy: f64,
}

/// Everything a step observer may inspect. Borrowed views into the run
/// loop's buffers; copy out what you need.
pub struct StepTrace<'a> {
    pub k: u64,
    pub epoch: usize,
    pub phase: PhaseLabel,
    pub gamma: f64,
    pub lambda: f64,
    pub batch: &'a [usize],
    pub grad: &'a [f64],
    pub y_prev: &'a [f64],
    pub y_new: &'a [f64],
    pub x_prev: &'a [f64],
    pub x_new: &'a [f64],
    /// Projection of the new `y` (the new `x` in exact phases).
    pub x_new_point: Option<&'a QuantizedPoint>,
    pub x_prev_point: Option<&'a QuantizedPoint>,
    /// Approximate-orthogonality record, when this step admits one
    /// (exact-phase step whose predecessor was also exact).
    pub alpha: Option<&'a AlphaRecord>,
}

pub trait StepObserver {
    fn on_step(&mut self, trace: &StepTrace<'_>);
}

/// Observer that ignores everything.
pub struct NoObserver;

impl StepObserver for NoObserver {
    fn on_step(&mut self, _trace: &StepTrace<'_>) {}
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub optimizer: OptimizerKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: LearningRateSchedule,
    pub relax: Option<RelaxationSchedule>,
    pub hyper: Hyperparams,
    pub seed: u64,
    /// Warm-start float weights; the oracle's seeded init when absent.
    pub init_params: Option<Vec<f64>>,
    /// Emit a record per iteration in addition to the per-epoch records.
    pub record_iterations: bool,
}

/// Run-level summary of the approximate-orthogonality constants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AlphaSummary {
    pub defined: u64,
    pub undefined: u64,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub records: Vec<MetricsRecord>,
    pub final_x: Vec<f64>,
    pub final_y: Vec<f64>,
    pub alpha: AlphaSummary,
    /// Sampled variance of minibatch gradients around their mean at the
    /// final iterate, over one shuffled batch partition. Zero when the
    /// batch covers the whole sample set.
    pub sigma2_estimate: f64,
    pub warnings: Vec<String>,
}

/// A failed run: what was recorded before the abort, plus the cause.
#[derive(Debug)]
pub struct RunFailure {
    pub records: Vec<MetricsRecord>,
    pub iteration: u64,
    pub error: Error,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "run aborted at iteration {}: {}",
            self.iteration, self.error
        )
    }
}

impl std::error::Error for RunFailure {}

struct AlphaAccum {
    defined: u64,
    undefined: u64,
    sum: f64,
    min: f64,
    max: f64,
}

impl AlphaAccum {
    fn new() -> Self {
        Self {
            defined: 0,
            undefined: 0,
            sum: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, rec: &AlphaRecord) {
        match rec.alpha {
            Some(a) => {
                self.defined += 1;
                self.sum += a;
                self.min = self.min.min(a);
                self.max = self.max.max(a);
            }
            None => self.undefined += 1,
        }
    }

    fn mean(&self) -> Option<f64> {
        (self.defined > 0).then(|| self.sum / self.defined as f64)
    }

    fn min(&self) -> Option<f64> {
        (self.defined > 0).then_some(self.min)
    }

    fn max(&self) -> Option<f64> {
        (self.defined > 0).then_some(self.max)
    }
}

fn validate_settings(
    settings: &RunSettings,
    oracle: &dyn GradientOracle,
    quant: Option<&ModelQuantizer>,
) -> Result<()> {
    if settings.epochs == 0 {
        return Err(Error::InvalidInput("epochs must be at least 1".into()));
    }
    let n = oracle.num_samples();
    if settings.batch_size == 0 || settings.batch_size > n {
        return Err(Error::InvalidInput(format!(
            "batch size must be in [1, {n}], got {}",
            settings.batch_size
        )));
    }
    settings.lr.validate()?;
    settings.hyper.validate()?;
    if let Some(relax) = &settings.relax {
        relax.validate()?;
    }
    if settings.optimizer.needs_quantizer() {
        let q = quant.ok_or_else(|| {
            Error::InvalidInput("quantized optimizer needs a quantization scheme".into())
        })?;
        if q.total_len() != oracle.dim() {
            return Err(Error::DimMismatch {
                expected: oracle.dim(),
                got: q.total_len(),
                context: "model quantizer vs oracle parameters",
            });
        }
    }
    if settings.optimizer == OptimizerKind::BinaryRelax && settings.relax.is_none() {
        return Err(Error::InvalidInput(
            "binaryrelax requires a relaxation schedule".into(),
        ));
    }
    Ok(())
}

/// Runs the configured scheme: per-epoch reshuffle from the run RNG, batch
/// loop, one metrics record per epoch. Fully deterministic given the seed.
///
/// A mid-run non-finite value aborts with the offending iteration and the
/// records collected so far.
pub fn run_training(
    settings: &RunSettings,
    oracle: &dyn GradientOracle,
    quant: Option<&ModelQuantizer>,
    val: Option<&Dataset>,
    observer: &mut dyn StepObserver,
) -> Result<RunOutput, Box<RunFailure>> {
    let fail = |records: Vec<MetricsRecord>, iteration: u64, error: Error| {
        Box::new(RunFailure {
            records,
            iteration,
            error,
        })
    };

    if let Err(e) = validate_settings(settings, oracle, quant) {
        return Err(fail(Vec::new(), 0, e));
    }

    let rng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, STREAM_SHUFFLE));
    let mut state = OptimizerState::init(
        settings.optimizer,
        oracle,
        quant,
        settings.relax.as_ref(),
        rng,
        settings.init_params.clone(),
    )
    .map_err(|e| fail(Vec::new(), 0, e))?;

    let n = oracle.num_samples();
    let num_batches = n.div_ceil(settings.batch_size);
    let epoch_fraction = 1.0 / num_batches as f64;
    let mut indices: Vec<usize> = (0..n).collect();

    let mut records: Vec<MetricsRecord> = Vec::with_capacity(settings.epochs);
    let mut run_alpha = AlphaAccum::new();
    let mut warnings = Vec::new();

    // Projection point of the current x, valid when x is an exact
    // projection of y (always for PSGD/BC, phase II for BinaryRelax).
    let mut prev_point: Option<QuantizedPoint> = match settings.optimizer {
        OptimizerKind::Float => None,
        OptimizerKind::BinaryRelax if state.phase == Phase::Relaxed => None,
        _ => match quant {
            Some(q) => Some(
                q.project(&state.y)
                    .map_err(|e| fail(Vec::new(), 0, e))?
                    .point,
            ),
            None => None,
        },
    };

    let mut y_prev = vec![0.0; state.y.len()];
    let mut x_prev = vec![0.0; state.x.len()];

    for epoch in 0..settings.epochs {
        let gamma = lr_at(&settings.lr, epoch);

        if settings.optimizer == OptimizerKind::BinaryRelax {
            let relax = settings.relax.as_ref().expect("validated");
            if relax.phase2_epoch == epoch && epoch > 0 {
                let lam = state.lambda.lambda;
                if !(100.0 < lam && lam < 200.0) {
                    warnings.push(format!(
                        "lambda = {lam:.3} at the phase switch is outside the (100, 200) window; \
                         the transition to exact quantization may drop accuracy"
                    ));
                }
            }
        }

        indices.shuffle(&mut state.rng);

        let mut epoch_alpha = AlphaAccum::new();
        let mut epoch_proxy_sum = 0.0;
        let mut epoch_iters = 0u64;

        for batch in indices.chunks(settings.batch_size) {
            let k = state.k;
            y_prev.copy_from_slice(&state.y);
            x_prev.copy_from_slice(&state.x);
            let phase_prev = state.phase;
            let had_prev_point = prev_point.is_some();

            let result: StepResult = {
                let stepped = match settings.optimizer {
                    OptimizerKind::Psgd => psgd_step(
                        &mut state,
                        oracle,
                        quant.expect("validated"),
                        &settings.hyper,
                        batch,
                        gamma,
                    ),
                    OptimizerKind::BinaryConnect => binaryconnect_step(
                        &mut state,
                        oracle,
                        quant.expect("validated"),
                        &settings.hyper,
                        batch,
                        gamma,
                    ),
                    OptimizerKind::BinaryRelax => binaryrelax_step(
                        &mut state,
                        oracle,
                        quant.expect("validated"),
                        &settings.hyper,
                        batch,
                        RelaxStepSchedule {
                            gamma,
                            relax: settings.relax.as_ref().expect("validated"),
                            epoch,
                            epochs_delta: epoch_fraction,
                        },
                    ),
                    OptimizerKind::Float => {
                        float_step(&mut state, oracle, &settings.hyper, batch, gamma)
                    }
                };
                match stepped {
                    Ok(r) => r,
                    Err(e) => return Err(fail(records, k, e)),
                }
            };

            if state.x.iter().any(|v| !v.is_finite()) {
                return Err(fail(
                    records,
                    k,
                    Error::NonFinite {
                        what: "weights",
                        iteration: k,
                    },
                ));
            }

            // Approximate orthogonality needs x^k = proj(y^k), i.e. the
            // previous x-update was an exact projection too.
            let exact_now = state.phase == Phase::Exact && settings.optimizer.needs_quantizer();
            let alpha = if exact_now && phase_prev == Phase::Exact && had_prev_point {
                let same_line = match (&prev_point, &result.projection) {
                    (Some(a), Some(b)) => a.same_line(b),
                    _ => None,
                };
                Some(alpha_record(k, &y_prev, &x_prev, &state.x, same_line))
            } else {
                None
            };
            if let Some(rec) = &alpha {
                epoch_alpha.push(rec);
                run_alpha.push(rec);
                // Near-zero alphas can only arise from tied projections with
                // the gradient orthogonal to the destination line; log the
                // angle but assert nothing (the event is measure-zero).
                if let (Some(a), Some(point)) = (rec.alpha, &result.projection) {
                    if a < 1e-6 && warnings.len() < 16 {
                        if let Some(angle) = gradient_line_angle(quant, &result.grad, point) {
                            warnings.push(format!(
                                "alpha_k = {a:.3e} at iteration {k}; gradient makes angle \
                                 {angle:.6} rad with the subspace of x^(k+1)"
                            ));
                        }
                    }
                }
            }

            let step_norm_sq: f64 = state
                .x
                .iter()
                .zip(&x_prev)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let proxy = step_norm_sq / (gamma * gamma);
            epoch_proxy_sum += proxy;
            epoch_iters += 1;

            let phase_label = phase_label(settings.optimizer, state.phase);
            observer.on_step(&StepTrace {
                k,
                epoch,
                phase: phase_label,
                gamma,
                lambda: state.lambda.lambda,
                batch,
                grad: &result.grad,
                y_prev: &y_prev,
                y_new: &state.y,
                x_prev: &x_prev,
                x_new: &state.x,
                x_new_point: result.projection.as_ref(),
                x_prev_point: prev_point.as_ref(),
                alpha: alpha.as_ref(),
            });

            if settings.record_iterations {
                let record = MetricsRecord {
                    epoch,
                    iter: state.k,
                    phase: phase_label,
                    lambda: state.lambda.lambda,
                    gamma,
                    train_loss: oracle.full_loss(&state.x),
                    val_loss: None,
                    val_acc: None,
                    dist_to_q: dist_of(quant, settings.optimizer, &state.x),
                    alpha_mean: alpha.as_ref().and_then(|a| a.alpha),
                    alpha_min: alpha.as_ref().and_then(|a| a.alpha),
                    alpha_undef_count: alpha.as_ref().map_or(0, |a| u64::from(a.alpha.is_none())),
                    stationarity_proxy: proxy,
                };
                records.push(record);
            }

            prev_point = if exact_now { result.projection } else { None };
        }

        let train_loss = oracle.full_loss(&state.x);
        if !train_loss.is_finite() {
            return Err(fail(
                records,
                state.k,
                Error::NonFinite {
                    what: "training loss",
                    iteration: state.k,
                },
            ));
        }
        let eval = val.and_then(|d| oracle.eval_on(&state.x, d));
        records.push(MetricsRecord {
            epoch,
            iter: state.k,
            phase: phase_label(settings.optimizer, state.phase),
            lambda: state.lambda.lambda,
            gamma,
            train_loss,
            val_loss: eval.map(|e| e.loss),
            val_acc: eval.map(|e| e.accuracy),
            dist_to_q: dist_of(quant, settings.optimizer, &state.x),
            alpha_mean: epoch_alpha.mean(),
            alpha_min: epoch_alpha.min(),
            alpha_undef_count: epoch_alpha.undefined,
            stationarity_proxy: epoch_proxy_sum / epoch_iters as f64,
        });
    }

    let sigma2_estimate = sigma2_estimate(settings, oracle, &state.x);

    Ok(RunOutput {
        records,
        final_x: state.x,
        final_y: state.y,
        alpha: AlphaSummary {
            defined: run_alpha.defined,
            undefined: run_alpha.undefined,
            mean: run_alpha.mean(),
            min: run_alpha.min(),
            max: run_alpha.max(),
        },
        sigma2_estimate,
        warnings,
    })
}

/// Acute angle between a gradient and the union-of-lines subspace holding
/// the next iterate; `None` for vanishing gradients.
fn gradient_line_angle(
    quant: Option<&ModelQuantizer>,
    grad: &[f64],
    point: &QuantizedPoint,
) -> Option<f64> {
    let quant = quant?;
    let projected = quant.project_onto_lines(grad, point).ok()?;
    let gn: f64 = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    if gn <= 1e-15 {
        return None;
    }
    let pn: f64 = projected.iter().map(|v| v * v).sum::<f64>().sqrt();
    Some((pn / gn).min(1.0).acos())
}

fn phase_label(kind: OptimizerKind, phase: Phase) -> PhaseLabel {
    match kind {
        OptimizerKind::Float => PhaseLabel::Float,
        OptimizerKind::BinaryRelax if phase == Phase::Relaxed => PhaseLabel::Relaxed,
        _ => PhaseLabel::Exact,
    }
}

fn dist_of(quant: Option<&ModelQuantizer>, kind: OptimizerKind, x: &[f64]) -> Option<f64> {
    if !kind.needs_quantizer() {
        return None;
    }
    quant.and_then(|q| q.dist(x).ok())
}

/// Variance of minibatch gradients around their mean over one shuffled
/// partition of the samples, evaluated at `x`.
fn sigma2_estimate(settings: &RunSettings, oracle: &dyn GradientOracle, x: &[f64]) -> f64 {
    let n = oracle.num_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, STREAM_SIGMA2));
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let grads: Vec<Vec<f64>> = indices
        .chunks(settings.batch_size)
        .map(|b| oracle.stochastic_grad(x, b))
        .collect();
    let num = grads.len();
    if num <= 1 {
        return 0.0;
    }
    let dim = x.len();
    let mut mean = vec![0.0; dim];
    for g in &grads {
        for (m, gi) in mean.iter_mut().zip(g) {
            *m += gi / num as f64;
        }
    }
    grads
        .iter()
        .map(|g| {
            g.iter()
                .zip(&mean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum::<f64>()
        / num as f64
}
