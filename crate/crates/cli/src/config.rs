//! Experiment configuration files.
//!
//! ```toml
//! seed = 7
//!
//! [task]
//! kind = "linear_regression"
//! features = 50
//! samples = 1000
//!
//! [train]
//! workers = 4
//! batch_size = 32
//! rounds = 300
//! method = "spectral_atomo:3"
//! step_size = 0.0078125        # or a [train.tune] grid
//!
//! [sweep]
//! methods = ["dense", "qsgd_1bit"]
//! ```

use std::path::Path;

use anyhow::{bail, Context, Result};
use atomo_core::sim::{Method, TaskSpec, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Seeds both the synthetic dataset and every training stream.
    #[serde(default)]
    pub seed: u64,
    pub task: TaskSpec,
    pub train: TrainSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub workers: usize,
    pub batch_size: usize,
    pub rounds: u64,
    #[serde(default = "dense")]
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    /// Tune `γ = 2^e` over the inclusive exponent range instead of using
    /// `step_size`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<TuneSection>,
    /// Defaults to 1.05× the least-squares optimum for linear regression.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_threshold: Option<f64>,
    #[serde(default)]
    pub record_wall_time: bool,
}

fn dense() -> Method {
    Method::Dense
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneSection {
    pub min_exponent: i32,
    pub max_exponent: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub methods: Vec<Method>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub method: Option<Method>,
    pub rounds: Option<u64>,
    pub step_size: Option<f64>,
    pub workers: Option<usize>,
    pub batch_size: Option<usize>,
    pub tune: Option<TuneSection>,
    pub loss_threshold: Option<f64>,
    pub record_wall_time: bool,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        let t = &mut self.train;
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(m) = o.method {
            t.method = m;
        }
        if let Some(r) = o.rounds {
            t.rounds = r;
        }
        if let Some(w) = o.workers {
            t.workers = w;
        }
        if let Some(b) = o.batch_size {
            t.batch_size = b;
        }
        if let Some(s) = o.step_size {
            t.step_size = Some(s);
            t.tune = None;
        }
        if o.tune.is_some() {
            t.tune = o.tune;
        }
        if o.loss_threshold.is_some() {
            t.loss_threshold = o.loss_threshold;
        }
        t.record_wall_time |= o.record_wall_time;
    }

    /// The simulator config. When tuning, the step size is a placeholder
    /// the tuner replaces.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let step_size = match (t.step_size, t.tune) {
            (_, Some(tune)) => {
                if tune.min_exponent > tune.max_exponent {
                    bail!("tune range {}..={} is empty", tune.min_exponent, tune.max_exponent);
                }
                1.0
            }
            (Some(s), None) => s,
            (None, None) => bail!("set train.step_size or a [train.tune] range"),
        };
        let config = TrainConfig {
            workers: t.workers,
            batch_size: t.batch_size,
            step_size,
            rounds: t.rounds,
            method: t.method,
            master_seed: self.seed,
            record_wall_time: t.record_wall_time,
        };
        config.validate()?;
        Ok(config)
    }
}
