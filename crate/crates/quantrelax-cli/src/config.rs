//! Run configuration: JSON schema, overrides, and cross-field validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use quantrelax::objectives::{
    gen_blobs, load_csv, make_logistic, make_mlp, make_quadratic, Activation, Dataset,
    GradientOracle, MlpLayout,
};
use quantrelax::optimizers::{
    Hyperparams, LearningRateSchedule, ModelQuantizer, OptimizerKind, RunSettings,
};
use quantrelax::quantizer::Solver;
use quantrelax::relaxation::RelaxationSchedule;
use quantrelax::seed::derive_seed;

/// Seed streams for per-purpose derivation from the run seed.
const STREAM_MLP_INIT: u64 = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Quadratic {
        c: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diag: Option<Vec<f64>>,
    },
    Logistic,
    Mlp {
        hidden: usize,
        activation: Activation,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSpec {
    Blobs {
        n_samples: usize,
        dim: usize,
        classes: usize,
        spread: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantSpec {
    pub solver: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bit_width: Option<u32>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_max_iters() -> usize {
    1
}

impl QuantSpec {
    pub fn resolve(&self) -> Result<(Vec<f64>, u32, Solver), String> {
        match self.solver.as_str() {
            "binary" => Ok((vec![1.0], 1, Solver::BinaryExact)),
            "ternary-exact" => Ok((vec![0.0, 1.0], 2, Solver::TernaryExact)),
            "ternary-threshold" => Ok((vec![0.0, 1.0], 2, Solver::TernaryThreshold)),
            "lloyd" => {
                let levels = self
                    .levels
                    .clone()
                    .ok_or_else(|| "lloyd solver requires explicit levels".to_string())?;
                let bits = self.bit_width.unwrap_or_else(|| {
                    // sign + magnitudes
                    (64 - (levels.len() as u64).leading_zeros()) + 1
                });
                Ok((levels, bits, Solver::Lloyd { max_iters: self.max_iters }))
            }
            other => Err(format!(
                "unknown solver {other:?} (expected binary, ternary-exact, ternary-threshold, lloyd)"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub objective: ObjectiveSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quant: Option<QuantSpec>,
    pub optimizer: OptimizerKind,
    pub lr: LearningRateSchedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relax: Option<RelaxationSchedule>,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Warm-start float weights from a checkpoint file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_checkpoint: Option<PathBuf>,
    /// Write the final float weights to this checkpoint file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_out: Option<PathBuf>,
    #[serde(default)]
    pub record_iterations: bool,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("config parse error: {e}"))
    }

    /// Applies `key=value` overrides through the JSON representation, so
    /// dotted paths like `relax.rho` address nested fields.
    pub fn apply_overrides(&self, overrides: &[String]) -> Result<Self, String> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut value = serde_json::to_value(self).map_err(|e| e.to_string())?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| format!("override {item:?} is not KEY=VALUE"))?;
            let parsed: serde_json::Value = match raw.parse::<serde_json::Value>() {
                Ok(v) => v,
                Err(_) => serde_json::Value::String(raw.to_string()),
            };
            let parts: Vec<&str> = key.split('.').collect();
            let mut cursor = &mut value;
            for part in &parts[..parts.len() - 1] {
                let obj = match cursor {
                    serde_json::Value::Object(map) => map,
                    _ => {
                        return Err(format!(
                            "override path {key:?} does not address an object field"
                        ))
                    }
                };
                cursor = obj
                    .entry((*part).to_string())
                    .or_insert_with(|| serde_json::Value::Object(Default::default()));
            }
            let obj = cursor
                .as_object_mut()
                .ok_or_else(|| format!("override path {key:?} does not address an object field"))?;
            obj.insert(parts.last().unwrap().to_string(), parsed);
        }
        serde_json::from_value(value).map_err(|e| format!("override produced invalid config: {e}"))
    }

    /// Cross-field validation. Returns every error at once plus non-fatal
    /// warnings.
    pub fn validate(&self) -> (Vec<String>, Vec<String>) {
        let mut errors = Vec::new();
        let mut warnings = Vec::new();

        match &self.objective {
            ObjectiveSpec::Quadratic { c, diag } => {
                if c.is_empty() {
                    errors.push("quadratic objective needs a nonempty center".into());
                }
                if let Some(d) = diag {
                    if d.len() != c.len() {
                        errors.push("quadratic diag length must match center".into());
                    }
                    // NaN must fail this check too, hence the negated form.
                    #[allow(clippy::neg_cmp_op_on_partial_ord)]
                    if d.iter().any(|v| !(*v > 0.0)) {
                        errors.push("quadratic diag entries must be positive".into());
                    }
                }
                if self.dataset.is_some() {
                    warnings.push("quadratic objective ignores the dataset spec".into());
                }
            }
            ObjectiveSpec::Logistic | ObjectiveSpec::Mlp { .. } => {
                if self.dataset.is_none() {
                    errors.push("classification objectives require a dataset".into());
                }
            }
        }
        if let ObjectiveSpec::Mlp { hidden, .. } = &self.objective {
            if *hidden == 0 {
                errors.push("mlp hidden width must be positive".into());
            }
        }

        if let Some(q) = &self.quant {
            if let Err(e) = q.resolve() {
                errors.push(e);
            }
        }
        match self.optimizer {
            OptimizerKind::Float => {
                if self.quant.is_some() {
                    warnings.push("float optimizer ignores the quant scheme".into());
                }
            }
            _ => {
                if self.quant.is_none() {
                    errors.push("quantized optimizers require a quant scheme".into());
                }
            }
        }
        if self.optimizer == OptimizerKind::BinaryRelax {
            match &self.relax {
                None => errors.push("binaryrelax requires a relax schedule".into()),
                Some(r) => {
                    if let Err(e) = r.validate() {
                        errors.push(e.to_string());
                    }
                    if r.rho <= 1.0 {
                        warnings.push("relax.rho <= 1 disables the continuation".into());
                    }
                    if r.phase2_epoch > self.epochs {
                        warnings.push(format!(
                            "phase2_epoch {} lies beyond the {} training epochs; phase II never runs",
                            r.phase2_epoch, self.epochs
                        ));
                    }
                }
            }
        }
        if let Err(e) = self.lr.validate() {
            errors.push(e.to_string());
        }
        let hyper = Hyperparams {
            momentum: self.momentum,
            weight_decay: self.weight_decay,
        };
        if let Err(e) = hyper.validate() {
            errors.push(e.to_string());
        }
        if self.epochs == 0 {
            errors.push("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            errors.push("batch size must be at least 1".into());
        }
        (errors, warnings)
    }
}

/// A config materialized into runnable pieces.
pub struct Materialized {
    pub oracle: Box<dyn GradientOracle>,
    pub quant: Option<ModelQuantizer>,
    pub val: Option<Dataset>,
    pub settings: RunSettings,
}

/// Builds oracle, quantizer and settings from a validated config. The run
/// seed drives shuffling and (for the MLP) weight initialization through
/// independent derived streams; the dataset seed is part of the dataset spec
/// so sweeps share data.
pub fn materialize(config: &RunConfig, seed: u64) -> Result<Materialized, String> {
    let split = match &config.dataset {
        Some(DatasetSpec::Blobs {
            n_samples,
            dim,
            classes,
            spread,
            seed,
        }) => {
            Some(gen_blobs(*n_samples, *dim, *classes, *spread, *seed).map_err(|e| e.to_string())?)
        }
        Some(DatasetSpec::Csv { path }) => {
            let data = load_csv(path).map_err(|e| e.to_string())?;
            Some(quantrelax::objectives::BlobSplit {
                train: data.clone(),
                val: data,
            })
        }
        None => None,
    };

    let oracle: Box<dyn GradientOracle> = match &config.objective {
        ObjectiveSpec::Quadratic { c, diag } => {
            Box::new(make_quadratic(c.clone(), diag.clone()).map_err(|e| e.to_string())?)
        }
        ObjectiveSpec::Logistic => {
            let split = split
                .as_ref()
                .ok_or("logistic objective requires a dataset")?;
            Box::new(make_logistic(split.train.clone()).map_err(|e| e.to_string())?)
        }
        ObjectiveSpec::Mlp { hidden, activation } => {
            let split = split.as_ref().ok_or("mlp objective requires a dataset")?;
            let layout = MlpLayout {
                input_dim: split.train.num_features(),
                hidden: *hidden,
                classes: split.train.num_classes(),
                activation: *activation,
            };
            Box::new(
                make_mlp(
                    layout,
                    split.train.clone(),
                    derive_seed(seed, STREAM_MLP_INIT),
                )
                .map_err(|e| e.to_string())?,
            )
        }
    };

    let quant = match (&config.quant, config.optimizer) {
        (_, OptimizerKind::Float) | (None, _) => None,
        (Some(spec), _) => {
            let (levels, bits, solver) = spec.resolve()?;
            Some(
                ModelQuantizer::for_oracle(levels, bits, solver, oracle.as_ref())
                    .map_err(|e| e.to_string())?,
            )
        }
    };

    let init_params = match &config.init_checkpoint {
        Some(path) => {
            Some(quantrelax::objectives::load_checkpoint(path).map_err(|e| e.to_string())?)
        }
        None => None,
    };

    let settings = RunSettings {
        optimizer: config.optimizer,
        epochs: config.epochs,
        batch_size: config.batch_size,
        lr: config.lr.clone(),
        relax: config.relax.clone(),
        hyper: Hyperparams {
            momentum: config.momentum,
            weight_decay: config.weight_decay,
        },
        seed,
        init_params,
        record_iterations: config.record_iterations,
    };

    Ok(Materialized {
        oracle,
        quant,
        val: split.map(|s| s.val),
        settings,
    })
}

/// Output directory resolution: flag, then config, then $QUANTRELAX_OUT,
/// then the current directory.
pub fn resolve_out_dir(flag: Option<&Path>, config: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &config.out_dir {
        return p.clone();
    }
    if let Ok(env) = std::env::var("QUANTRELAX_OUT") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    PathBuf::from(".")
}
