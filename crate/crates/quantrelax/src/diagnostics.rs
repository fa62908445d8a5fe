//! Numerical instruments for the convergence analysis: the
//! approximate-orthogonality constant `alpha_k`, the minimum line angle
//! `theta_min`, the stationarity proxy, and the relaxed-landscape descent
//! check.

use crate::error::{Error, Result};
use crate::objectives::GradientOracle;
use crate::optimizers::ModelQuantizer;
use crate::quantizer::{LineSubspace, QuantScheme};

/// Norm threshold below which `alpha_k` is recorded as undefined: the
/// identity it solves is vacuous when `x^{k+1} = x^k`.
pub const ALPHA_UNDEFINED_STEP_NORM: f64 = 1e-12;

/// `alpha_k` makes `alpha_k ||x^{k+1}-x^k||^2 + ||y^k-x^k||^2 =
/// ||y^k-x^{k+1}||^2` hold; it equals 1 exactly when consecutive quantized
/// iterates share a line.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaRecord {
    pub k: u64,
    /// `None` when the step norm is below [`ALPHA_UNDEFINED_STEP_NORM`].
    pub alpha: Option<f64>,
    /// Whether `x^{k+1}` and `x^k` share a line; `None` when either point
    /// sits at the origin of some group.
    pub same_line: Option<bool>,
    pub step_norm: f64,
}

/// The `alpha_k` arithmetic alone, with the line flag supplied by the
/// caller. The numerator is accumulated per coordinate so coordinates where
/// both differences agree bitwise cancel exactly.
pub fn alpha_record(
    k: u64,
    y_k: &[f64],
    x_k: &[f64],
    x_k1: &[f64],
    same_line: Option<bool>,
) -> AlphaRecord {
    let mut numerator = 0.0;
    let mut step_norm_sq = 0.0;
    for ((&y, &x0), &x1) in y_k.iter().zip(x_k).zip(x_k1) {
        let a = y - x1;
        let b = y - x0;
        numerator += a * a - b * b;
        let d = x1 - x0;
        step_norm_sq += d * d;
    }
    let step_norm = step_norm_sq.sqrt();
    let alpha = (step_norm >= ALPHA_UNDEFINED_STEP_NORM).then(|| numerator / step_norm_sq);
    AlphaRecord {
        k,
        alpha,
        same_line,
        step_norm,
    }
}

/// Computes `alpha_k` for a phase-II triple `(y^k, x^k, x^{k+1})`.
///
/// Checks that `x^k` and `x^{k+1}` lie in `Q` and that `x^k` is a projection
/// of `y^k` onto its own line within `1e-9` of the residual (the triple must
/// come from a step where `x^k = proj(y^k)` held).
pub fn alpha_k(
    quant: &ModelQuantizer,
    k: u64,
    y_k: &[f64],
    x_k: &[f64],
    x_k1: &[f64],
) -> Result<AlphaRecord> {
    if y_k.len() != x_k.len() || y_k.len() != x_k1.len() {
        return Err(Error::DimMismatch {
            expected: y_k.len(),
            got: x_k.len().min(x_k1.len()),
            context: "alpha_k vectors",
        });
    }
    let p0 = quant.project(x_k)?;
    let scale = norm(x_k).max(1.0);
    if dist(&p0.x, x_k) > 1e-9 * scale {
        return Err(Error::Contract("x_k is not a point of Q".into()));
    }
    let p1 = quant.project(x_k1)?;
    if dist(&p1.x, x_k1) > 1e-9 * norm(x_k1).max(1.0) {
        return Err(Error::Contract("x_k1 is not a point of Q".into()));
    }
    // Projection consistency: ||y - x_k|| must match the residual of the
    // projection of y onto x_k's own line.
    let line_proj = quant.project_onto_lines(y_k, &p0.point)?;
    let diff = (dist(y_k, x_k) - dist(y_k, &line_proj)).abs();
    if diff > 1e-9 * norm(y_k).max(1.0) {
        return Err(Error::Contract(
            "x_k is not a projection of y_k (line residual mismatch)".into(),
        ));
    }
    Ok(alpha_record(
        k,
        y_k,
        x_k,
        x_k1,
        p0.point.same_line(&p1.point),
    ))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Smallest angle formed by any two line subspaces of `Q` in dimension `n`,
/// by enumeration of canonical direction codes. Pairs closer than 1e-12
/// radians are treated as the same line (positive multiples) and skipped.
///
/// Enumeration caps: `n <= 12` for binary, `n <= 8` for ternary, and a
/// 1e8-pair budget for other level sets.
pub fn theta_min(scheme: &QuantScheme, n: usize) -> Result<f64> {
    scheme.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    let levels = scheme.levels();
    let has_zero = levels[0] == 0.0;
    let nonzero: Vec<f64> = levels.iter().copied().filter(|&q| q != 0.0).collect();
    let alphabet = 2 * nonzero.len() + usize::from(has_zero);

    let cap: Option<usize> = match (alphabet, has_zero) {
        (2, false) => Some(12), // binary
        (3, true) => Some(8),   // ternary
        _ => None,
    };
    if let Some(cap) = cap {
        if n > cap {
            return Err(Error::EnumerationBound(format!(
                "theta_min enumeration is limited to n <= {cap} for this level set, got n = {n}"
            )));
        }
    } else {
        let lines = (alphabet as f64).powi(n as i32) / 2.0;
        if lines * lines > 1e8 {
            return Err(Error::EnumerationBound(format!(
                "theta_min would enumerate ~{lines:.0} lines (pair budget 1e8 exceeded)"
            )));
        }
    }

    // Signed code values; first nonzero entry constrained positive gives one
    // representative per sign class.
    let mut values: Vec<f64> = Vec::with_capacity(alphabet);
    if has_zero {
        values.push(0.0);
    }
    for &q in &nonzero {
        values.push(q);
        values.push(-q);
    }

    let mut lines: Vec<LineSubspace> = Vec::new();
    let mut digits = vec![0usize; n];
    'outer: loop {
        let code: Vec<f64> = digits.iter().map(|&d| values[d]).collect();
        if let Some(line) = LineSubspace::from_code(&code) {
            if line.code() == code.as_slice() {
                lines.push(line);
            }
        }
        let mut pos = 0;
        loop {
            if pos == n {
                break 'outer;
            }
            digits[pos] += 1;
            if digits[pos] < values.len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }

    if lines.len() < 2 {
        return Err(Error::InvalidInput(
            "level set spans fewer than two lines; theta_min undefined".into(),
        ));
    }

    let mut min_angle = f64::INFINITY;
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let angle = lines[i].angle_to(&lines[j]);
            if angle < 1e-12 {
                continue; // same line via a positive multiple
            }
            min_angle = min_angle.min(angle);
        }
    }
    Ok(min_angle)
}

/// `||x^{k+1} - x^k||^2 / gamma_k^2`, the quantity whose expectation the
/// convergence bound controls.
pub fn stationarity_proxy(x_k: &[f64], x_k1: &[f64], gamma_k: f64) -> Result<f64> {
    if !(gamma_k > 0.0) {
        return Err(Error::InvalidInput("gamma must be positive".into()));
    }
    let d = dist(x_k, x_k1);
    Ok(d * d / (gamma_k * gamma_k))
}

/// Checks that a quantized point with nonzero gradient is not a local
/// minimizer of the relaxed objective: returns the first `beta` in the grid
/// for which `f(x - beta g) + (lambda/2) dist(x - beta g, Q)^2 < f(x)`, or
/// `None` if the grid finds no descent.
///
/// Errs on a (near-)zero gradient, where the claim does not apply.
pub fn descent_check(
    x_star: &[f64],
    oracle: &dyn GradientOracle,
    quant: &ModelQuantizer,
    lambda: f64,
    beta_grid: &[f64],
) -> Result<Option<f64>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(
            "lambda must be nonnegative and finite".into(),
        ));
    }
    let grad = oracle.full_grad(x_star);
    if norm(&grad) <= 1e-8 {
        return Err(Error::Contract(
            "descent check requires a nonzero gradient at x*".into(),
        ));
    }
    let f_star = oracle.full_loss(x_star);
    for &beta in beta_grid {
        let candidate: Vec<f64> = x_star
            .iter()
            .zip(&grad)
            .map(|(x, g)| x - beta * g)
            .collect();
        let d = quant.dist(&candidate)?;
        let relaxed = oracle.full_loss(&candidate) + 0.5 * lambda * d * d;
        if relaxed < f_star {
            return Ok(Some(beta));
        }
    }
    Ok(None)
}
