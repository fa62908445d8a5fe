//! Exhaustive quantization oracle for verifying the closed-form kernels.

use crate::error::{Error, Result};
use crate::quantizer::QuantizedPoint;

/// Largest admissible dimension for a given signed-code alphabet size,
/// keeping the enumeration within the work of ternary n = 10 (3^10 codes).
fn max_dim(signed_codes: usize) -> usize {
    match signed_codes {
        2 => 14, // binary
        3 => 10, // ternary
        c => {
            let mut n = 0usize;
            let mut total = 1u64;
            while total.saturating_mul(c as u64) <= 60_000 {
                total *= c as u64;
                n += 1;
            }
            n
        }
    }
}

/// Enumerates every code vector over the signed level set, picks the optimal
/// scale `s = max(0, <Q,y>/||Q||^2)` per code, and returns the global
/// minimizer of `||s*Q - y||^2`. Ties keep the first code in enumeration
/// order (odometer over signed values sorted ascending).
///
/// Refuses dimensions beyond the per-alphabet enumeration bound.
pub fn brute_force_quantize(y: &[f64], levels: &[f64]) -> Result<QuantizedPoint> {
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if levels.is_empty() || levels[0] < 0.0 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidScheme(
            "levels must be strictly increasing and nonnegative".into(),
        ));
    }
    let mut values: Vec<f64> = Vec::with_capacity(2 * levels.len());
    for &q in levels.iter().rev() {
        if q != 0.0 {
            values.push(-q);
        }
    }
    values.extend_from_slice(levels);

    let n = y.len();
    let bound = max_dim(values.len());
    if n > bound {
        return Err(Error::EnumerationBound(format!(
            "brute-force quantization over {} signed codes is limited to n <= {bound}, got n = {n}",
            values.len()
        )));
    }

    let mut digits = vec![0usize; n];
    let mut codes = vec![values[0]; n];
    let mut best: Option<(f64, f64, Vec<f64>)> = None;

    loop {
        let norm_sq: f64 = codes.iter().map(|c| c * c).sum();
        let (scale, objective) = if norm_sq == 0.0 {
            (0.0, y.iter().map(|v| v * v).sum())
        } else {
            let dot: f64 = codes.iter().zip(y).map(|(c, v)| c * v).sum();
            let s = (dot / norm_sq).max(0.0);
            let obj = codes
                .iter()
                .zip(y)
                .map(|(c, v)| {
                    let r = s * c - v;
                    r * r
                })
                .sum();
            (s, obj)
        };
        match &best {
            Some((best_obj, _, _)) if *best_obj <= objective => {}
            _ => best = Some((objective, scale, codes.clone())),
        }

        // Advance the odometer.
        let mut pos = 0;
        loop {
            if pos == n {
                let (_, scale, codes) = best.expect("at least one candidate");
                return Ok(QuantizedPoint::single(scale, codes));
            }
            digits[pos] += 1;
            if digits[pos] < values.len() {
                codes[pos] = values[digits[pos]];
                break;
            }
            digits[pos] = 0;
            codes[pos] = values[0];
            pos += 1;
        }
    }
}
