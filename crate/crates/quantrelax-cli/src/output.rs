//! Metrics CSV and run-summary JSON emission.
//!
//! Floats in the CSV print with 17 significant digits so golden files are
//! byte-stable and round-trip exactly on the same platform.

use std::io::Write;
use std::path::Path;

use quantrelax::optimizers::{AlphaSummary, MetricsRecord};

pub const METRICS_HEADER: &str = "epoch,iter,phase,lambda,gamma,train_loss,val_loss,val_acc,\
dist_to_q,alpha_mean,alpha_min,alpha_undef_count,stationarity_proxy";

/// 17 significant digits, scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn metrics_row(r: &MetricsRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.epoch,
        r.iter,
        r.phase,
        fmt_f64(r.lambda),
        fmt_f64(r.gamma),
        fmt_f64(r.train_loss),
        fmt_opt(r.val_loss),
        fmt_opt(r.val_acc),
        fmt_opt(r.dist_to_q),
        fmt_opt(r.alpha_mean),
        fmt_opt(r.alpha_min),
        r.alpha_undef_count,
        fmt_f64(r.stationarity_proxy),
    )
}

pub fn write_metrics_csv(path: &Path, records: &[MetricsRecord]) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "{METRICS_HEADER}")?;
    for r in records {
        writeln!(file, "{}", metrics_row(r))?;
    }
    Ok(())
}

#[derive(serde::Serialize)]
pub struct RunSummary<'a> {
    pub status: &'a str,
    pub seed: u64,
    pub wall_time_s: f64,
    pub final_train_loss: Option<f64>,
    pub final_val_loss: Option<f64>,
    pub final_val_acc: Option<f64>,
    pub final_dist_to_q: Option<f64>,
    pub alpha: Option<AlphaSummary>,
    pub sigma2_estimate: Option<f64>,
    pub warnings: &'a [String],
    pub overrides: &'a [String],
    pub error: Option<String>,
    pub config: serde_json::Value,
}

pub fn write_summary(path: &Path, summary: &RunSummary<'_>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    std::fs::write(path, text)
}
