//! `quantrelax quantize`: project a vector onto the quantization set and
//! report the factorization.

use std::collections::BTreeMap;
use std::path::Path;

use quantrelax::quantizer::{
    binarize, brute_force_quantize, lloyd_quantize, ternarize_exact, ternarize_threshold,
    LloydInit, QuantizedPoint,
};

use crate::output::fmt_f64;
use crate::{EXIT_OK, EXIT_VALIDATION};

fn parse_vector(text: &str) -> Result<Vec<f64>, String> {
    let mut values = Vec::new();
    for (i, token) in text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .enumerate()
    {
        let v: f64 = token
            .parse()
            .map_err(|_| format!("value {} ({token:?}) is not a number", i + 1))?;
        if !v.is_finite() {
            return Err(format!("value {} ({token:?}) is not finite", i + 1));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err("input contains no values".into());
    }
    Ok(values)
}

pub fn execute(
    vector_file: &Path,
    solver: &str,
    levels: Option<&[f64]>,
    max_iters: usize,
    oracle: bool,
    print_codes: bool,
) -> u8 {
    let text = match std::fs::read_to_string(vector_file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", vector_file.display());
            return EXIT_VALIDATION;
        }
    };
    let y = match parse_vector(&text) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("parse error: {e}");
            return EXIT_VALIDATION;
        }
    };

    let (point, exact, oracle_levels): (QuantizedPoint, bool, Vec<f64>) = match solver {
        "binary" => (binarize(&y).expect("nonempty"), true, vec![1.0]),
        "ternary-exact" => (ternarize_exact(&y).expect("nonempty"), true, vec![0.0, 1.0]),
        "ternary-threshold" => (
            ternarize_threshold(&y).expect("nonempty"),
            false,
            vec![0.0, 1.0],
        ),
        "lloyd" => {
            let Some(levels) = levels else {
                eprintln!("error: lloyd solver requires --levels");
                return EXIT_VALIDATION;
            };
            match lloyd_quantize(&y, levels, max_iters, LloydInit::MaxAbsOverTop) {
                Ok(p) => (p, false, levels.to_vec()),
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_VALIDATION;
                }
            }
        }
        other => {
            eprintln!(
                "error: unknown solver {other:?} (binary, ternary-exact, ternary-threshold, lloyd)"
            );
            return EXIT_VALIDATION;
        }
    };

    let group = &point.groups()[0];
    let residual_sq = point.objective(&y);
    let residual = residual_sq.sqrt();
    println!("n = {}", y.len());
    println!("scale = {}", fmt_f64(group.scale));
    let mut histogram: BTreeMap<String, usize> = BTreeMap::new();
    for &c in &group.codes {
        *histogram.entry(format!("{c}")).or_default() += 1;
    }
    let hist: Vec<String> = histogram.iter().map(|(k, v)| format!("{k}: {v}")).collect();
    println!("codes = {{{}}}", hist.join(", "));
    println!("residual = {}", fmt_f64(residual));
    println!("residual_sq = {}", fmt_f64(residual_sq));
    if exact {
        println!("dist_to_q = {}", fmt_f64(residual));
    } else {
        println!(
            "dist_to_q <= {} (solver is not exact; upper bound)",
            fmt_f64(residual)
        );
    }
    if print_codes {
        let codes: Vec<String> = group.codes.iter().map(|c| format!("{c}")).collect();
        println!("code_vector = [{}]", codes.join(", "));
    }

    if oracle {
        match brute_force_quantize(&y, &oracle_levels) {
            Ok(best) => {
                let best_obj = best.objective(&y);
                let obj = residual_sq;
                if (obj - best_obj).abs() <= 1e-10 * best_obj.max(1.0) {
                    println!("oracle: MATCH (objective {})", fmt_f64(best_obj));
                } else {
                    println!(
                        "oracle: MISMATCH (solver {} vs oracle {})",
                        fmt_f64(obj),
                        fmt_f64(best_obj)
                    );
                    if exact {
                        // An exact solver disagreeing with enumeration is a bug.
                        return EXIT_VALIDATION;
                    }
                }
            }
            Err(e) => {
                eprintln!("error: oracle refused: {e}");
                return EXIT_VALIDATION;
            }
        }
    }
    EXIT_OK
}
