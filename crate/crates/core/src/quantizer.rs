//! ℓq-quantization: keep coordinate `i` with probability `|gᵢ|/‖g‖_q` and
//! send `sign(gᵢ)·‖g‖_q`. This is atomic sparsification in the standard
//! basis at budget `s = ‖g‖₁/‖g‖_q`, and always `s`-balanced. `q = 2` is
//! 1-bit QSGD and `q = ∞` is TernGrad.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::atoms::{decompose_entrywise, AtomDescriptor, DecompositionKind, Tensor};
use crate::error::{Error, Result};
use crate::sparsifier::{KeptAtom, ProbabilityVector, RngStream, SparsifiedGradient, SparsityBudget};

/// Norm order `q ∈ (0, ∞]`.
///
/// For `q < 1` the functional `‖·‖_q` is only a quasi-norm (no triangle
/// inequality). It still dominates `‖·‖_∞`, so the induced probabilities are
/// valid, and it is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum QNorm {
    Finite(f64),
    Infinity,
}

impl QNorm {
    pub fn new(q: f64) -> Result<Self> {
        if q == f64::INFINITY {
            Ok(Self::Infinity)
        } else if q.is_finite() && q > 0.0 {
            Ok(Self::Finite(q))
        } else {
            Err(Error::InvalidNorm(q))
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Self::Finite(q) => q,
            Self::Infinity => f64::INFINITY,
        }
    }

    pub fn is_quasi_norm(self) -> bool {
        matches!(self, Self::Finite(q) if q < 1.0)
    }
}

impl fmt::Display for QNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(q) => write!(f, "{q}"),
            Self::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for QNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Self::Infinity),
            other => {
                let q: f64 = other
                    .parse()
                    .map_err(|_| Error::Config(format!("invalid norm order {other:?}")))?;
                Self::new(q)
            }
        }
    }
}

impl TryFrom<String> for QNorm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<QNorm> for String {
    fn from(q: QNorm) -> String {
        q.to_string()
    }
}

/// `‖g‖_q`, computed on `g / ‖g‖_∞` to stay clear of overflow for large `q`.
pub fn lq_norm(g: &[f64], q: QNorm) -> f64 {
    let max = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    match q {
        QNorm::Infinity => max,
        _ if max == 0.0 => 0.0,
        QNorm::Finite(q) if q == 1.0 => g.iter().map(|x| x.abs()).sum(),
        QNorm::Finite(q) if q == 2.0 => {
            max * g.iter().map(|x| (x / max) * (x / max)).sum::<f64>().sqrt()
        }
        QNorm::Finite(q) => max * g.iter().map(|x| (x.abs() / max).powf(q)).sum::<f64>().powf(1.0 / q),
    }
}

fn nonzero_norm(g: &[f64], q: QNorm) -> Result<f64> {
    if let Some(index) = g.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let norm = lq_norm(g, q);
    if norm == 0.0 {
        return Err(Error::DegenerateInput("gradient is zero"));
    }
    Ok(norm)
}

/// `s = ‖g‖₁/‖g‖_q`.
pub fn lq_sparsity_budget(g: &[f64], q: QNorm) -> Result<SparsityBudget> {
    let norm = nonzero_norm(g, q)?;
    let l1: f64 = g.iter().map(|x| x.abs()).sum();
    SparsityBudget::new(l1 / norm)
}

/// `pᵢ = |gᵢ|/‖g‖_q`.
pub fn lq_probabilities(g: &[f64], q: QNorm) -> Result<ProbabilityVector> {
    let norm = nonzero_norm(g, q)?;
    ProbabilityVector::new(g.iter().map(|x| (x.abs() / norm).min(1.0)).collect())
}

/// One draw of `L_q(g)`. Kept coordinates carry exactly `sign(gᵢ)·‖g‖_q`.
///
/// Uniforms are consumed in the same order as
/// [`sample_sparsification`](crate::sparsifier::sample_sparsification) so the
/// two paths agree draw for draw.
pub fn lq_quantize(g: &Tensor, q: QNorm, rng: &mut RngStream) -> Result<SparsifiedGradient> {
    let norm = nonzero_norm(g.data(), q)?;
    let p = lq_probabilities(g.data(), q)?;
    let mut kept_atoms = Vec::new();
    for (i, (&gi, &pi)) in g.data().iter().zip(p.as_slice()).enumerate() {
        if pi > 0.0 && rng.bernoulli(pi) {
            kept_atoms.push(KeptAtom {
                atom: AtomDescriptor::StandardBasis(i),
                weight: gi.signum() * norm,
            });
        }
    }
    Ok(SparsifiedGradient {
        decomposition_kind: DecompositionKind::Entrywise,
        kept_atoms,
        original_shape: g.shape().to_vec(),
        budget_used: p.sum(),
    })
}

/// The entry-wise decomposition and probabilities `L_q` sparsifies with.
pub fn lq_as_atomic(g: &Tensor, q: QNorm) -> Result<(crate::atoms::AtomicDecomposition, ProbabilityVector)> {
    Ok((decompose_entrywise(g), lq_probabilities(g.data(), q)?))
}

pub fn qsgd_1bit(g: &Tensor, rng: &mut RngStream) -> Result<SparsifiedGradient> {
    lq_quantize(g, QNorm::Finite(2.0), rng)
}

pub fn terngrad(g: &Tensor, rng: &mut RngStream) -> Result<SparsifiedGradient> {
    lq_quantize(g, QNorm::Infinity, rng)
}
