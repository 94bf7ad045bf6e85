//! Variance-optimal unbiased atomic sparsification.
//!
//! Given `g = Σ λᵢ aᵢ` and a budget `s`, each atom is kept independently
//! with probability `pᵢ` and rescaled to `λᵢ/pᵢ`, so `E[ĝ] = g` and, for
//! orthonormal atoms, `E‖ĝ‖² = Σ λᵢ²/pᵢ`.

mod rng;
mod solver;

use serde::{Deserialize, Serialize};

pub use rng::{derive_seed, splitmix64, RngStream};
pub use solver::{atomo_probabilities_select, atomo_probabilities_sorted};

use crate::atoms::{AtomDescriptor, AtomicDecomposition, DecompositionKind, Tensor};
use crate::error::{Error, Result};

/// Expected number of atoms to keep. May be fractional.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SparsityBudget(f64);

impl SparsityBudget {
    pub fn new(s: f64) -> Result<Self> {
        if s.is_finite() && s > 0.0 {
            Ok(Self(s))
        } else {
            Err(Error::InvalidBudget(s))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SparsityBudget {
    type Error = Error;

    fn try_from(s: f64) -> Result<Self> {
        Self::new(s)
    }
}

impl From<SparsityBudget> for f64 {
    fn from(s: SparsityBudget) -> f64 {
        s.0
    }
}

/// Per-atom inclusion probabilities aligned with a coefficient vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(index) = p.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Shape(format!(
                "probability {} at index {index} is outside [0, 1]",
                p[index]
            )));
        }
        Ok(Self(p))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeptAtom {
    pub atom: AtomDescriptor,
    /// `λᵢ / pᵢ`
    pub weight: f64,
}

/// One draw of the sparsified estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsifiedGradient {
    pub decomposition_kind: DecompositionKind,
    pub kept_atoms: Vec<KeptAtom>,
    pub original_shape: Vec<usize>,
    pub budget_used: f64,
}

impl SparsifiedGradient {
    pub fn materialize(&self) -> Tensor {
        let len = self.original_shape.iter().product();
        let mut out = vec![0.0; len];
        for kept in &self.kept_atoms {
            kept.atom.accumulate(kept.weight, &mut out);
        }
        Tensor::new(self.original_shape.clone(), out).expect("sparsified gradient shape is valid")
    }

    /// `‖ĝ‖²`, using orthonormality of the kept atoms.
    pub fn squared_norm(&self) -> f64 {
        self.kept_atoms.iter().map(|k| k.weight * k.weight).sum()
    }

    pub fn len(&self) -> usize {
        self.kept_atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept_atoms.is_empty()
    }
}

/// `s ≤ ‖λ‖₁/‖λ‖_∞`; equality counts as balanced.
pub fn is_s_balanced(lambda: &[f64], s: SparsityBudget) -> Result<bool> {
    let l1: f64 = lambda.iter().map(|x| x.abs()).sum();
    let linf = lambda.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if linf == 0.0 {
        return Err(Error::DegenerateInput("all coefficients are zero"));
    }
    Ok(s.get() <= l1 / linf)
}

/// Keeps atom `i` with probability `pᵢ`, drawing one uniform per atom with
/// `pᵢ > 0` in index order.
pub fn sample_sparsification(
    d: &AtomicDecomposition,
    p: &ProbabilityVector,
    rng: &mut RngStream,
) -> Result<SparsifiedGradient> {
    if p.len() != d.len() || d.atoms.len() != d.len() {
        return Err(Error::LengthMismatch {
            what: "probability vector",
            expected: d.len(),
            actual: p.len(),
        });
    }
    let mut kept_atoms = Vec::new();
    for (i, (&pi, &lambda)) in p.as_slice().iter().zip(&d.coefficients).enumerate() {
        if pi == 0.0 {
            if lambda != 0.0 {
                return Err(Error::InfiniteVariance { index: i });
            }
            continue;
        }
        if rng.bernoulli(pi) {
            kept_atoms.push(KeptAtom {
                atom: d.atoms[i].clone(),
                weight: lambda / pi,
            });
        }
    }
    Ok(SparsifiedGradient {
        decomposition_kind: d.kind,
        kept_atoms,
        original_shape: d.original_shape.clone(),
        budget_used: p.sum(),
    })
}

/// Solves for the optimal probabilities and draws one sparsified estimate.
pub fn sparsify(
    d: &AtomicDecomposition,
    s: SparsityBudget,
    rng: &mut RngStream,
) -> Result<SparsifiedGradient> {
    let p = atomo_probabilities_sorted(&d.coefficients, s)?;
    sample_sparsification(d, &p, rng)
}

/// `Σ_{pᵢ>0} λᵢ²/pᵢ`, the second moment for orthonormal atoms.
pub fn expected_second_moment(lambda: &[f64], p: &ProbabilityVector) -> Result<f64> {
    if lambda.len() != p.len() {
        return Err(Error::LengthMismatch {
            what: "probability vector",
            expected: lambda.len(),
            actual: p.len(),
        });
    }
    let mut total = 0.0;
    for (i, (&l, &pi)) in lambda.iter().zip(p.as_slice()).enumerate() {
        if pi > 0.0 {
            total += l * l / pi;
        } else if l != 0.0 {
            return Err(Error::InfiniteVariance { index: i });
        }
    }
    Ok(total)
}

/// `‖λ‖₁²/s`, attained exactly when `λ` is `s`-balanced.
pub fn optimal_second_moment_lower_bound(lambda: &[f64], s: SparsityBudget) -> f64 {
    let l1: f64 = lambda.iter().map(|x| x.abs()).sum();
    l1 * l1 / s.get()
}
