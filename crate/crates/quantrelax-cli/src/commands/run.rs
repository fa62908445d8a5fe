//! `quantrelax run`: execute one training run, emit metrics CSV and a JSON
//! summary.

use std::path::Path;
use std::time::Instant;

use quantrelax::objectives::save_checkpoint;
use quantrelax::optimizers::{run_training, NoObserver};

use crate::config::{materialize, resolve_out_dir, RunConfig};
use crate::output::{write_metrics_csv, write_summary, RunSummary};
use crate::{EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION};

pub fn execute(
    config_path: &Path,
    overrides: &[String],
    out: Option<&Path>,
    seed_flag: Option<u64>,
) -> u8 {
    let base = match RunConfig::from_file(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    let mut config = match base.apply_overrides(overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    if let Some(seed) = seed_flag {
        config.seed = seed;
    }

    let (errors, mut warnings) = config.validate();
    if !errors.is_empty() {
        for e in &errors {
            eprintln!("config error: {e}");
        }
        return EXIT_VALIDATION;
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let out_dir = resolve_out_dir(out, &config);
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create output dir {}: {e}", out_dir.display());
        return EXIT_VALIDATION;
    }

    let materialized = match materialize(&config, config.seed) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };

    let config_echo = serde_json::to_value(&config).expect("config serializes");
    let start = Instant::now();
    let result = run_training(
        &materialized.settings,
        materialized.oracle.as_ref(),
        materialized.quant.as_ref(),
        materialized.val.as_ref(),
        &mut NoObserver,
    );
    let wall = start.elapsed().as_secs_f64();

    let csv_path = out_dir.join("metrics.csv");
    let summary_path = out_dir.join("summary.json");

    match result {
        Ok(output) => {
            warnings.extend(output.warnings.iter().cloned());
            if let Err(e) = write_metrics_csv(&csv_path, &output.records) {
                eprintln!("error: cannot write {}: {e}", csv_path.display());
                return EXIT_RUNTIME;
            }
            if let Some(path) = &config.checkpoint_out {
                if let Err(e) = save_checkpoint(path, &output.final_y) {
                    eprintln!("error: cannot write checkpoint {}: {e}", path.display());
                    return EXIT_RUNTIME;
                }
            }
            let last = output.records.last();
            let summary = RunSummary {
                status: "ok",
                seed: config.seed,
                wall_time_s: wall,
                final_train_loss: last.map(|r| r.train_loss),
                final_val_loss: last.and_then(|r| r.val_loss),
                final_val_acc: last.and_then(|r| r.val_acc),
                final_dist_to_q: last.and_then(|r| r.dist_to_q),
                alpha: Some(output.alpha),
                sigma2_estimate: Some(output.sigma2_estimate),
                warnings: &warnings,
                overrides,
                error: None,
                config: config_echo,
            };
            if let Err(e) = write_summary(&summary_path, &summary) {
                eprintln!("error: cannot write {}: {e}", summary_path.display());
                return EXIT_RUNTIME;
            }
            println!(
                "run complete: {} epochs, metrics in {}",
                config.epochs,
                csv_path.display()
            );
            EXIT_OK
        }
        Err(failure) => {
            // Flush whatever was recorded, mark the summary failed.
            let _ = write_metrics_csv(&csv_path, &failure.records);
            let summary = RunSummary {
                status: "failed",
                seed: config.seed,
                wall_time_s: wall,
                final_train_loss: failure.records.last().map(|r| r.train_loss),
                final_val_loss: None,
                final_val_acc: None,
                final_dist_to_q: None,
                alpha: None,
                sigma2_estimate: None,
                warnings: &warnings,
                overrides,
                error: Some(failure.to_string()),
                config: config_echo,
            };
            let _ = write_summary(&summary_path, &summary);
            eprintln!("error: {failure}");
            EXIT_RUNTIME
        }
    }
}
