//! Fast named property checks, a CI-friendly subset of the full acceptance
//! suite. Each check runs in at most a few seconds and reports pass/fail
//! with a one-line detail.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diagnostics::{descent_check, theta_min};
use crate::objectives::{
    finite_difference_grad, gen_blobs, make_logistic, make_mlp, make_quadratic, Activation,
    GradientOracle, MlpLayout,
};
use crate::optimizers::{
    binaryconnect_step, binaryrelax_step, run_training, Hyperparams, LearningRateSchedule,
    ModelQuantizer, NoObserver, OptimizerKind, OptimizerState, RelaxStepSchedule, RunSettings,
};
use crate::quantizer::{
    binarize, brute_force_quantize, dist_to_q, project, ternarize_exact, ternarize_threshold,
    GroupLayout, QuantScheme,
};
use crate::relaxation::{advance_lambda, relaxed_prox, RelaxationSchedule};

/// Deliberate perturbations for mutation smoke tests. All zeros in normal
/// operation; tests inject nonzero values and assert the named check fails.
#[derive(Debug, Clone, Copy, Default)]
pub struct Faults {
    /// Added to every coordinate of the computed proximal step before the
    /// optimality comparison.
    pub prox_bias: f64,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn pass(name: &'static str, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed: true,
            detail: detail.into(),
        }
    }

    fn fail(name: &'static str, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed: false,
            detail: detail.into(),
        }
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Runs every check whose name contains `filter` (all checks when `None`).
pub fn run_checks(filter: Option<&str>, faults: &Faults) -> Vec<CheckOutcome> {
    type Check = (&'static str, fn(&Faults) -> CheckOutcome);
    let checks: Vec<Check> = vec![
        ("quantizer-oracle-binary", check_oracle_binary),
        ("quantizer-oracle-ternary", check_oracle_ternary),
        ("quantizer-twn-gap", check_twn_gap),
        ("prox-optimality", check_prox_optimality),
        ("prox-limits", check_prox_limits),
        ("relaxation-global-consistency", check_global_consistency),
        ("descent-witness", check_descent_witness),
        ("alpha-theta-identities", check_alpha_theta),
        ("theorem-trend", check_theorem_trend),
        ("reduction-binaryconnect", check_reduction_binaryconnect),
        ("reduction-sgd", check_reduction_sgd),
        ("lambda-continuation", check_lambda_continuation),
        ("gradient-integrity", check_gradient_integrity),
    ];
    checks
        .into_iter()
        .filter(|(name, _)| filter.is_none_or(|f| name.contains(f)))
        .map(|(_, f)| f(faults))
        .collect()
}

fn check_oracle_binary(_: &Faults) -> CheckOutcome {
    let name = "quantizer-oracle-binary";
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let y = normal_vec(&mut rng, 8);
        let fast = binarize(&y).unwrap().objective(&y);
        let oracle = brute_force_quantize(&y, &[1.0]).unwrap().objective(&y);
        let gap = (fast - oracle).abs() / oracle.max(1.0);
        worst = worst.max(gap);
        if gap > 1e-10 {
            return CheckOutcome::fail(
                name,
                format!("vector {i}: objective {fast} vs oracle {oracle}"),
            );
        }
    }
    CheckOutcome::pass(name, format!("200 vectors, worst relative gap {worst:.2e}"))
}

fn check_oracle_ternary(_: &Faults) -> CheckOutcome {
    let name = "quantizer-oracle-ternary";
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let y = normal_vec(&mut rng, 8);
        let fast = ternarize_exact(&y).unwrap().objective(&y);
        let oracle = brute_force_quantize(&y, &[0.0, 1.0]).unwrap().objective(&y);
        let gap = (fast - oracle).abs() / oracle.max(1.0);
        worst = worst.max(gap);
        if gap > 1e-10 {
            return CheckOutcome::fail(
                name,
                format!("vector {i}: objective {fast} vs oracle {oracle}"),
            );
        }
    }
    CheckOutcome::pass(name, format!("200 vectors, worst relative gap {worst:.2e}"))
}

fn check_twn_gap(_: &Faults) -> CheckOutcome {
    let name = "quantizer-twn-gap";
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut strict = 0usize;
    for i in 0..200 {
        let y = normal_vec(&mut rng, 8);
        let exact = ternarize_exact(&y).unwrap().residual_norm(&y);
        let approx = ternarize_threshold(&y).unwrap().residual_norm(&y);
        if approx < exact - 1e-12 {
            return CheckOutcome::fail(
                name,
                format!("vector {i}: threshold residual {approx} below exact {exact}"),
            );
        }
        if approx > exact + 1e-9 {
            strict += 1;
        }
    }
    if strict == 0 {
        return CheckOutcome::fail(name, "no strict suboptimality witness found".to_string());
    }
    CheckOutcome::pass(
        name,
        format!("threshold never beats exact; {strict}/200 strict gaps"),
    )
}

fn check_prox_optimality(faults: &Faults) -> CheckOutcome {
    let name = "prox-optimality";
    let scheme = QuantScheme::ternary(GroupLayout::single(6).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let lambdas = [0.1, 1.0, 10.0, 100.0];
    for trial in 0..40 {
        let y = normal_vec(&mut rng, 6);
        let lambda = lambdas[trial % lambdas.len()];
        let mut x = relaxed_prox(&y, lambda, &scheme).unwrap();
        for xi in &mut x {
            *xi += faults.prox_bias;
        }
        let objective = |v: &[f64]| -> f64 {
            let d = dist_to_q(v, &scheme).unwrap();
            let diff: f64 = v.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
            0.5 * diff + 0.5 * lambda * d * d
        };
        let obj_x = objective(&x);
        let proj = project(&y, &scheme).unwrap();
        let mut candidates = vec![y.clone(), proj.materialized().to_vec()];
        for g in 1..100 {
            let t = g as f64 / 100.0;
            candidates.push(
                y.iter()
                    .zip(proj.materialized())
                    .map(|(a, b)| a + t * (b - a))
                    .collect(),
            );
        }
        for c in &candidates {
            if obj_x > objective(c) + 1e-9 {
                return CheckOutcome::fail(
                    name,
                    format!("trial {trial}: prox objective {obj_x} beaten by candidate"),
                );
            }
        }
    }
    CheckOutcome::pass(name, "prox beats endpoints and segment grid on 40 trials")
}

fn check_prox_limits(_: &Faults) -> CheckOutcome {
    let name = "prox-limits";
    let scheme = QuantScheme::binary(GroupLayout::single(5).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for _ in 0..20 {
        let y = normal_vec(&mut rng, 5);
        let x = relaxed_prox(&y, 1e-12, &scheme).unwrap();
        if x.iter().zip(&y).any(|(a, b)| (a - b).abs() > 1e-9) {
            return CheckOutcome::fail(name, "lambda -> 0 limit does not match y".to_string());
        }
        let proj = project(&y, &scheme).unwrap();
        let x = relaxed_prox(&y, 1e9, &scheme).unwrap();
        if x.iter()
            .zip(proj.materialized())
            .any(|(a, b)| (a - b).abs() > 1e-6 * b.abs().max(1.0))
        {
            return CheckOutcome::fail(name, "lambda -> inf limit does not match proj".to_string());
        }
    }
    CheckOutcome::pass(name, "lambda limits match y and proj(y) on 20 vectors")
}

/// Global minimizer of `f + (lambda/2) dist^2` for a diagonal quadratic over
/// ternary n=2, found per line in closed form and minimized across lines.
fn relaxed_global_min_ternary2(c: [f64; 2], lambda: f64) -> ([f64; 2], f64, f64) {
    let scheme = QuantScheme::ternary(GroupLayout::single(2).unwrap());
    let lines: [[f64; 2]; 4] = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]];
    let mut best: Option<([f64; 2], f64, f64)> = None;
    for l in lines {
        let norm = (l[0] * l[0] + l[1] * l[1]).sqrt();
        let u = [l[0] / norm, l[1] / norm];
        let c_par = c[0] * u[0] + c[1] * u[1];
        let perp = [c[0] - c_par * u[0], c[1] - c_par * u[1]];
        // Objective along u + t*perp_dir: (a - c_par)^2 + (b - |perp|)^2 +
        // (lambda/2) b^2, minimized at a = c_par, b = |perp| / (1 + lambda/2).
        let perp_norm = (perp[0] * perp[0] + perp[1] * perp[1]).sqrt();
        let b = perp_norm / (1.0 + lambda / 2.0);
        let x = if perp_norm == 0.0 {
            [c_par * u[0], c_par * u[1]]
        } else {
            [
                c_par * u[0] + b * perp[0] / perp_norm,
                c_par * u[1] + b * perp[1] / perp_norm,
            ]
        };
        let f = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
        let d = dist_to_q(&x, &scheme).unwrap();
        let total = f + 0.5 * lambda * d * d;
        if best.is_none_or(|(_, _, t)| total < t) {
            best = Some((x, f, total));
        }
    }
    let (x, f, _) = best.unwrap();
    let d = dist_to_q(&x, &scheme).unwrap();
    (x, f, d)
}

fn check_global_consistency(_: &Faults) -> CheckOutcome {
    let name = "relaxation-global-consistency";
    let c = [1.0, 0.2];
    let f_q_star = 0.04;
    let mut prev_dist = f64::INFINITY;
    let mut last_f = 0.0;
    for lambda in [1.0, 10.0, 100.0, 1000.0, 10000.0] {
        let (_, f, d) = relaxed_global_min_ternary2(c, lambda);
        if d >= prev_dist {
            return CheckOutcome::fail(
                name,
                format!("dist not strictly decreasing at lambda = {lambda}: {d} >= {prev_dist}"),
            );
        }
        prev_dist = d;
        last_f = f;
    }
    if (last_f - f_q_star).abs() > f_q_star * 1e-3 {
        return CheckOutcome::fail(
            name,
            format!("f(x*_lambda) = {last_f} not within 1e-3 of constrained optimum {f_q_star}"),
        );
    }
    CheckOutcome::pass(
        name,
        format!("dist decreases monotonically; f -> {last_f:.6}"),
    )
}

fn check_descent_witness(_: &Faults) -> CheckOutcome {
    let name = "descent-witness";
    let oracle = make_quadratic(vec![1.0, 0.2], Some(vec![2.0, 2.0])).unwrap();
    let scheme = QuantScheme::ternary(GroupLayout::single(2).unwrap());
    let quant = ModelQuantizer::whole_vector(&scheme, 2).unwrap();
    let grid = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let lines: [[f64; 2]; 4] = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]];
    let mut checked = 0usize;
    for l in lines {
        for s in [0.3, 0.7, 1.1, 1.6, -0.4] {
            let x = [s * l[0], s * l[1]];
            let grad = oracle.full_grad(&x);
            if grad.iter().map(|g| g * g).sum::<f64>().sqrt() <= 1e-8 {
                continue;
            }
            match descent_check(&x, &oracle, &quant, 10.0, &grid) {
                Ok(Some(_)) => checked += 1,
                Ok(None) => {
                    return CheckOutcome::fail(
                        name,
                        format!("no descent direction found at quantized point {x:?}"),
                    )
                }
                Err(e) => return CheckOutcome::fail(name, format!("{e}")),
            }
        }
    }
    CheckOutcome::pass(
        name,
        format!("descent witness found at {checked} quantized points"),
    )
}

fn check_alpha_theta(_: &Faults) -> CheckOutcome {
    let name = "alpha-theta-identities";
    let ternary = QuantScheme::ternary(GroupLayout::single(2).unwrap());
    let binary = QuantScheme::binary(GroupLayout::single(3).unwrap());
    let t2 = theta_min(&ternary, 2).unwrap();
    if (t2 - std::f64::consts::FRAC_PI_4).abs() > 1e-12 {
        return CheckOutcome::fail(name, format!("theta_min ternary n=2 = {t2}, want pi/4"));
    }
    let b3 = theta_min(&binary, 3).unwrap();
    if (b3 - (1.0f64 / 3.0).acos()).abs() > 1e-12 {
        return CheckOutcome::fail(name, format!("theta_min binary n=3 = {b3}, want acos(1/3)"));
    }

    // Phase-II trace on the on-axis quadratic: every defined alpha is
    // nonnegative and same-line steps give alpha = 1 exactly.
    let oracle = make_quadratic(vec![1.0, 0.0], Some(vec![2.0, 2.0])).unwrap();
    let quant = ModelQuantizer::whole_vector(&ternary, 2).unwrap();
    let settings = RunSettings {
        optimizer: OptimizerKind::BinaryRelax,
        epochs: 250,
        batch_size: 1,
        lr: LearningRateSchedule::constant(0.01),
        relax: Some(RelaxationSchedule {
            lambda0: 1.0,
            rho: 1.0,
            cadence_epochs: 1.0,
            phase2_epoch: 0,
        }),
        hyper: Hyperparams::default(),
        seed: 11,
        init_params: Some(vec![0.3, 0.0]),
        record_iterations: false,
    };
    let out = match run_training(&settings, &oracle, Some(&quant), None, &mut NoObserver) {
        Ok(o) => o,
        Err(e) => return CheckOutcome::fail(name, format!("{e}")),
    };
    if out.alpha.defined == 0 {
        return CheckOutcome::fail(name, "trace produced no defined alpha".to_string());
    }
    if out.alpha.min.unwrap() < -1e-10 {
        return CheckOutcome::fail(name, format!("alpha_min = {:?}", out.alpha.min));
    }
    if (out.alpha.max.unwrap() - 1.0).abs() > 1e-8 || (out.alpha.min.unwrap() - 1.0).abs() > 1e-8 {
        return CheckOutcome::fail(
            name,
            format!(
                "same-line alphas deviate from 1: {:?}..{:?}",
                out.alpha.min, out.alpha.max
            ),
        );
    }
    CheckOutcome::pass(
        name,
        format!(
            "theta_min values exact; {} defined alphas all equal 1 ({} undefined)",
            out.alpha.defined, out.alpha.undefined
        ),
    )
}

fn check_theorem_trend(_: &Faults) -> CheckOutcome {
    let name = "theorem-trend";
    let oracle = make_quadratic(vec![1.0, 0.0], Some(vec![16.0, 16.0])).unwrap();
    let scheme = QuantScheme::ternary(GroupLayout::single(2).unwrap());
    let quant = ModelQuantizer::whole_vector(&scheme, 2).unwrap();
    let mut state = OptimizerState::init(
        OptimizerKind::BinaryConnect,
        &oracle,
        Some(&quant),
        None,
        ChaCha8Rng::seed_from_u64(0),
        Some(vec![0.5, 0.0]),
    )
    .unwrap();
    let batch = [0usize, 1];
    let iters = 4000usize;
    let tail_start = iters - iters / 10;
    let mut tail_sum = 0.0;
    let mut proxy_min = f64::INFINITY;
    let mut x_prev = state.x.clone();
    for k in 0..iters {
        let gamma = 0.05 / (k as f64 + 1.0);
        binaryconnect_step(
            &mut state,
            &oracle,
            &quant,
            &Hyperparams::default(),
            &batch,
            gamma,
        )
        .unwrap();
        let step_sq: f64 = state
            .x
            .iter()
            .zip(&x_prev)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if k >= tail_start {
            tail_sum += step_sq;
        }
        proxy_min = proxy_min.min(step_sq / (gamma * gamma));
        x_prev.copy_from_slice(&state.x);
    }
    let tail_mean = tail_sum / (iters - tail_start) as f64;
    if tail_mean >= 1e-6 {
        return CheckOutcome::fail(name, format!("tail mean step^2 = {tail_mean:.3e}"));
    }
    if proxy_min >= 1e-4 {
        return CheckOutcome::fail(name, format!("running min proxy = {proxy_min:.3e}"));
    }
    CheckOutcome::pass(
        name,
        format!("tail mean step^2 = {tail_mean:.1e}, min proxy = {proxy_min:.1e}"),
    )
}

fn check_reduction_binaryconnect(_: &Faults) -> CheckOutcome {
    let name = "reduction-binaryconnect";
    let oracle = make_quadratic(vec![1.0, 0.3], Some(vec![2.0, 2.0])).unwrap();
    let scheme = QuantScheme::ternary(GroupLayout::single(2).unwrap());
    let quant = ModelQuantizer::whole_vector(&scheme, 2).unwrap();
    let relax = RelaxationSchedule {
        lambda0: 1.0,
        rho: 1.02,
        cadence_epochs: 1.0,
        phase2_epoch: 0,
    };
    let mut bc = OptimizerState::init(
        OptimizerKind::BinaryConnect,
        &oracle,
        Some(&quant),
        None,
        ChaCha8Rng::seed_from_u64(1),
        Some(vec![0.4, 0.1]),
    )
    .unwrap();
    let mut br = OptimizerState::init(
        OptimizerKind::BinaryRelax,
        &oracle,
        Some(&quant),
        Some(&relax),
        ChaCha8Rng::seed_from_u64(1),
        Some(vec![0.4, 0.1]),
    )
    .unwrap();
    let h = Hyperparams {
        momentum: 0.9,
        weight_decay: 1e-4,
    };
    let batch = [0usize, 1];
    for k in 0..200 {
        binaryconnect_step(&mut bc, &oracle, &quant, &h, &batch, 0.02).unwrap();
        binaryrelax_step(
            &mut br,
            &oracle,
            &quant,
            &h,
            &batch,
            RelaxStepSchedule {
                gamma: 0.02,
                relax: &relax,
                epoch: k,
                epochs_delta: 1.0,
            },
        )
        .unwrap();
        if bc.y != br.y || bc.x != br.x {
            return CheckOutcome::fail(name, format!("trajectories diverged at step {k}"));
        }
    }
    CheckOutcome::pass(
        name,
        "T=0 BinaryRelax is bitwise BinaryConnect over 200 steps",
    )
}

fn check_reduction_sgd(_: &Faults) -> CheckOutcome {
    let name = "reduction-sgd";
    let oracle = make_quadratic(vec![1.0, 0.3], Some(vec![2.0, 2.0])).unwrap();
    let scheme = QuantScheme::ternary(GroupLayout::single(2).unwrap());
    let quant = ModelQuantizer::whole_vector(&scheme, 2).unwrap();
    let relax = RelaxationSchedule {
        lambda0: 1e-12,
        rho: 1.0,
        cadence_epochs: 1.0,
        phase2_epoch: usize::MAX,
    };
    let mut br = OptimizerState::init(
        OptimizerKind::BinaryRelax,
        &oracle,
        Some(&quant),
        Some(&relax),
        ChaCha8Rng::seed_from_u64(2),
        Some(vec![0.4, 0.1]),
    )
    .unwrap();
    let mut float = OptimizerState::init(
        OptimizerKind::Float,
        &oracle,
        None,
        None,
        ChaCha8Rng::seed_from_u64(2),
        Some(vec![0.4, 0.1]),
    )
    .unwrap();
    let h = Hyperparams::default();
    let batch = [0usize, 1];
    for k in 0..200 {
        crate::optimizers::float_step(&mut float, &oracle, &h, &batch, 0.02).unwrap();
        binaryrelax_step(
            &mut br,
            &oracle,
            &quant,
            &h,
            &batch,
            RelaxStepSchedule {
                gamma: 0.02,
                relax: &relax,
                epoch: 0,
                epochs_delta: 0.0,
            },
        )
        .unwrap();
        for (a, b) in br.y.iter().zip(&float.y) {
            if (a - b).abs() > 1e-9 {
                return CheckOutcome::fail(name, format!("y drifted by {:.2e} at step {k}", a - b));
            }
        }
    }
    CheckOutcome::pass(
        name,
        "vanishing-lambda BinaryRelax tracks plain SGD within 1e-9",
    )
}

fn check_lambda_continuation(_: &Faults) -> CheckOutcome {
    let name = "lambda-continuation";
    let schedule = RelaxationSchedule::new(1.0, 1.02, 1.0, 240).unwrap();
    let mut state = schedule.initial_state();
    for _ in 0..240 {
        state = advance_lambda(&schedule, state, 1.0).unwrap();
    }
    if !(100.0 < state.lambda && state.lambda < 200.0) {
        return CheckOutcome::fail(name, format!("lambda after 240 epochs = {}", state.lambda));
    }
    if (state.lambda - 115.8887).abs() > 1e-3 {
        return CheckOutcome::fail(name, format!("lambda = {} (want ~115.889)", state.lambda));
    }
    CheckOutcome::pass(
        name,
        format!("lambda after 240 epochs = {:.4}", state.lambda),
    )
}

fn check_gradient_integrity(_: &Faults) -> CheckOutcome {
    let name = "gradient-integrity";
    let split = gen_blobs(60, 2, 2, 0.8, 31).unwrap();
    let logistic = make_logistic(split.train.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..5 {
        let x: Vec<f64> = normal_vec(&mut rng, logistic.dim());
        let g = logistic.full_grad(&x);
        let fd = finite_difference_grad(&logistic, &x, 1e-6);
        if !close_vecs(&g, &fd, 1e-5) {
            return CheckOutcome::fail(name, "logistic gradient mismatch".to_string());
        }
    }
    let split = gen_blobs(60, 3, 3, 0.8, 33).unwrap();
    let layout = MlpLayout {
        input_dim: 3,
        hidden: 5,
        classes: 3,
        activation: Activation::Tanh,
    };
    let mlp = make_mlp(layout, split.train, 34).unwrap();
    for _ in 0..5 {
        let x: Vec<f64> = normal_vec(&mut rng, mlp.dim())
            .iter()
            .map(|v| v * 0.4)
            .collect();
        let g = mlp.full_grad(&x);
        let fd = finite_difference_grad(&mlp, &x, 1e-6);
        if !close_vecs(&g, &fd, 1e-4) {
            return CheckOutcome::fail(name, "mlp gradient mismatch".to_string());
        }
    }
    CheckOutcome::pass(name, "logistic and MLP gradients match central differences")
}

fn close_vecs(a: &[f64], b: &[f64], rel: f64) -> bool {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff <= rel * scale.max(1.0)
}
