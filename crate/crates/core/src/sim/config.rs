use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::QNorm;
use crate::sparsifier::SparsityBudget;

/// How each worker compresses every layer gradient before sending it.
///
/// Textual forms: `dense`, `atomo_entrywise:<s>`, `spectral_atomo:<s'>`,
/// `qsgd_1bit`, `terngrad`, `lq:<q>` (`q` may be `inf`). Budgets apply per
/// layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Dense,
    AtomoEntrywise(SparsityBudget),
    SpectralAtomo(SparsityBudget),
    Qsgd1Bit,
    TernGrad,
    Lq(QNorm),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Dense => f.write_str("dense"),
            Method::AtomoEntrywise(s) => write!(f, "atomo_entrywise:{}", s.get()),
            Method::SpectralAtomo(s) => write!(f, "spectral_atomo:{}", s.get()),
            Method::Qsgd1Bit => f.write_str("qsgd_1bit"),
            Method::TernGrad => f.write_str("terngrad"),
            Method::Lq(q) => write!(f, "lq:{q}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s, None),
        };
        let budget = |a: Option<&str>| -> Result<SparsityBudget> {
            let a = a.ok_or_else(|| Error::Config(format!("method {name:?} needs a budget, e.g. {name}:3")))?;
            let v: f64 = a
                .parse()
                .map_err(|_| Error::Config(format!("invalid budget {a:?} in method {s:?}")))?;
            SparsityBudget::new(v)
        };
        let no_arg = |m: Method| -> Result<Method> {
            match arg {
                None => Ok(m),
                Some(_) => Err(Error::Config(format!("method {name:?} takes no argument"))),
            }
        };
        match name {
            "dense" => no_arg(Method::Dense),
            "atomo_entrywise" | "atomo" => Ok(Method::AtomoEntrywise(budget(arg)?)),
            "spectral_atomo" | "spectral" => Ok(Method::SpectralAtomo(budget(arg)?)),
            "qsgd_1bit" | "qsgd" => no_arg(Method::Qsgd1Bit),
            "terngrad" => no_arg(Method::TernGrad),
            "lq" => {
                let a = arg.ok_or_else(|| Error::Config("method lq needs a norm order, e.g. lq:3".into()))?;
                Ok(Method::Lq(a.parse()?))
            }
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// `P`
    pub workers: usize,
    /// `B`, split evenly across workers.
    pub batch_size: usize,
    /// `γ`
    pub step_size: f64,
    pub rounds: u64,
    pub method: Method,
    pub master_seed: u64,
    /// Measure per-round wall time. Off by default so metrics are
    /// reproducible byte for byte.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.batch_size == 0 || !self.batch_size.is_multiple_of(self.workers) {
            return Err(Error::Config(format!(
                "batch size {} must be a positive multiple of {} workers",
                self.batch_size, self.workers
            )));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::Config(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        Ok(())
    }

    pub fn per_worker_batch(&self) -> usize {
        self.batch_size / self.workers
    }
}
