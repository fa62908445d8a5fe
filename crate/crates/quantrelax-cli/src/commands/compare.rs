//! `quantrelax compare`: optimizer x seed cross product with a summary
//! table. Runs execute concurrently; results are independent of scheduling
//! because every run derives its own seeds.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use quantrelax::optimizers::{run_training, NoObserver, OptimizerKind};

use crate::config::{materialize, resolve_out_dir, RunConfig};
use crate::output::fmt_f64;
use crate::{EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION};

struct Cell {
    optimizer: String,
    seed: u64,
    val_acc: Option<f64>,
    train_loss: Option<f64>,
    failed: bool,
}

fn parse_optimizer(name: &str) -> Option<OptimizerKind> {
    match name {
        "psgd" => Some(OptimizerKind::Psgd),
        "binaryconnect" => Some(OptimizerKind::BinaryConnect),
        "binaryrelax" => Some(OptimizerKind::BinaryRelax),
        "float" => Some(OptimizerKind::Float),
        _ => None,
    }
}

pub fn execute(
    config_path: &Path,
    optimizers: &[String],
    seeds: &[u64],
    overrides: &[String],
    out: Option<&Path>,
    jobs: usize,
) -> u8 {
    let base = match RunConfig::from_file(config_path).and_then(|c| c.apply_overrides(overrides)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    if optimizers.is_empty() || seeds.is_empty() {
        eprintln!("error: need at least one optimizer and one seed");
        return EXIT_VALIDATION;
    }
    for name in optimizers {
        if parse_optimizer(name).is_none() {
            eprintln!("error: unknown optimizer {name:?}");
            return EXIT_VALIDATION;
        }
    }

    // Validate each optimizer variant of the config up front.
    let mut jobs_list = Vec::new();
    for name in optimizers {
        let mut config = base.clone();
        config.optimizer = parse_optimizer(name).unwrap();
        let (errors, _) = config.validate();
        if !errors.is_empty() {
            for e in &errors {
                eprintln!("config error ({name}): {e}");
            }
            return EXIT_VALIDATION;
        }
        for &seed in seeds {
            jobs_list.push((name.clone(), seed, config.clone()));
        }
    }

    let out_dir = resolve_out_dir(out, &base);
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create output dir {}: {e}", out_dir.display());
        return EXIT_VALIDATION;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");

    let cells: Vec<Cell> = pool.install(|| {
        jobs_list
            .par_iter()
            .map(|(name, seed, config)| {
                let materialized = match materialize(config, *seed) {
                    Ok(m) => m,
                    Err(_) => {
                        return Cell {
                            optimizer: name.clone(),
                            seed: *seed,
                            val_acc: None,
                            train_loss: None,
                            failed: true,
                        }
                    }
                };
                match run_training(
                    &materialized.settings,
                    materialized.oracle.as_ref(),
                    materialized.quant.as_ref(),
                    materialized.val.as_ref(),
                    &mut NoObserver,
                ) {
                    Ok(output) => {
                        let last = output.records.last();
                        Cell {
                            optimizer: name.clone(),
                            seed: *seed,
                            val_acc: last.and_then(|r| r.val_acc),
                            train_loss: last.map(|r| r.train_loss),
                            failed: false,
                        }
                    }
                    Err(_) => Cell {
                        optimizer: name.clone(),
                        seed: *seed,
                        val_acc: None,
                        train_loss: None,
                        failed: true,
                    },
                }
            })
            .collect()
    });

    let table_path = out_dir.join("comparison.csv");
    let mut file = match std::fs::File::create(&table_path) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: cannot write {}: {e}", table_path.display());
            return EXIT_RUNTIME;
        }
    };
    let mut any_failed = false;
    let _ = writeln!(
        file,
        "row,optimizer,seed,final_val_acc,final_train_loss,status"
    );
    for cell in &cells {
        any_failed |= cell.failed;
        let _ = writeln!(
            file,
            "run,{},{},{},{},{}",
            cell.optimizer,
            cell.seed,
            cell.val_acc.map(fmt_f64).unwrap_or_default(),
            cell.train_loss.map(fmt_f64).unwrap_or_default(),
            if cell.failed { "failed" } else { "ok" },
        );
    }
    // Per-optimizer mean/stddev rows over successful runs.
    for name in optimizers {
        let accs: Vec<f64> = cells
            .iter()
            .filter(|c| &c.optimizer == name && !c.failed)
            .filter_map(|c| c.val_acc)
            .collect();
        let losses: Vec<f64> = cells
            .iter()
            .filter(|c| &c.optimizer == name && !c.failed)
            .filter_map(|c| c.train_loss)
            .collect();
        let (acc_m, acc_s) = mean_std(&accs);
        let (loss_m, _) = mean_std(&losses);
        let _ = writeln!(
            file,
            "summary,{},,{},{},mean_std={}",
            name,
            acc_m.map(fmt_f64).unwrap_or_default(),
            loss_m.map(fmt_f64).unwrap_or_default(),
            acc_s.map(fmt_f64).unwrap_or_default(),
        );
    }

    println!(
        "compared {} optimizers x {} seeds -> {}",
        optimizers.len(),
        seeds.len(),
        table_path.display()
    );
    if any_failed {
        eprintln!("error: at least one run failed; see table for cell status");
        EXIT_RUNTIME
    } else {
        EXIT_OK
    }
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64;
    (Some(mean), Some(var.sqrt()))
}
