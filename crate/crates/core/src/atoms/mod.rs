//! Tensors and their atomic decompositions `g = Σ λᵢ aᵢ` over unit-norm,
//! pairwise-orthogonal atoms.

mod svd;
mod tensor;

use serde::{Deserialize, Serialize};

pub use svd::{svd, SvdResult, TRUNCATION_RATIO};
pub use tensor::{Tensor, TENSOR_MAGIC};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionKind {
    /// Standard basis of the flattened tensor.
    Entrywise,
    /// Rank-one singular triplets of a matrix.
    Svd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AtomDescriptor {
    /// `e_i` in row-major flat indexing.
    StandardBasis(usize),
    /// `u vᵀ` with unit `u` and `v`.
    RankOne { u: Vec<f64>, v: Vec<f64> },
}

impl AtomDescriptor {
    /// Frobenius inner product of two atoms living in the same space.
    pub fn inner(&self, other: &AtomDescriptor) -> f64 {
        use AtomDescriptor::*;
        match (self, other) {
            (StandardBasis(i), StandardBasis(j)) => f64::from(u8::from(i == j)),
            (RankOne { u: u1, v: v1 }, RankOne { u: u2, v: v2 }) => dot(u1, u2) * dot(v1, v2),
            (StandardBasis(k), RankOne { u, v }) | (RankOne { u, v }, StandardBasis(k)) => {
                let m = v.len();
                u[k / m] * v[k % m]
            }
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            AtomDescriptor::StandardBasis(_) => 1.0,
            AtomDescriptor::RankOne { u, v } => (dot(u, u) * dot(v, v)).sqrt(),
        }
    }

    /// Adds `weight · atom` into a row-major buffer of the atom's space.
    pub fn accumulate(&self, weight: f64, out: &mut [f64]) {
        match self {
            AtomDescriptor::StandardBasis(i) => out[*i] += weight,
            AtomDescriptor::RankOne { u, v } => svd::add_outer(out, weight, u, v),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicDecomposition {
    pub kind: DecompositionKind,
    pub coefficients: Vec<f64>,
    pub atoms: Vec<AtomDescriptor>,
    pub original_shape: Vec<usize>,
}

impl AtomicDecomposition {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn reconstruct(&self) -> Tensor {
        reconstruct(self)
    }
}

pub fn decompose_entrywise(t: &Tensor) -> AtomicDecomposition {
    AtomicDecomposition {
        kind: DecompositionKind::Entrywise,
        coefficients: t.data().to_vec(),
        atoms: (0..t.len()).map(AtomDescriptor::StandardBasis).collect(),
        original_shape: t.shape().to_vec(),
    }
}

pub fn decompose_svd(m: &Tensor) -> Result<AtomicDecomposition> {
    let r = svd(m)?;
    Ok(AtomicDecomposition {
        kind: DecompositionKind::Svd,
        coefficients: r.singular_values,
        atoms: r
            .u_vectors
            .into_iter()
            .zip(r.v_vectors)
            .map(|(u, v)| AtomDescriptor::RankOne { u, v })
            .collect(),
        original_shape: m.shape().to_vec(),
    })
}

/// Flattens a `[x, y, k, k]` convolution gradient into a matrix.
///
/// The row-major buffer is kept as is and regrouped into `[xy/2, 2k²]`, so
/// each row holds two consecutive `k x k` kernels. Odd `xy` falls back to
/// `[xy, k²]`.
pub fn reshape_conv(t: &Tensor) -> Result<Tensor> {
    let [x, y, k1, k2] = t.shape()[..] else {
        return Err(Error::Shape(format!(
            "expected a rank-4 convolution tensor, got shape {:?}",
            t.shape()
        )));
    };
    if k1 != k2 {
        return Err(Error::Shape(format!(
            "kernel dimensions differ: {k1} x {k2}"
        )));
    }
    let xy = x * y;
    let kk = k1 * k2;
    let shape = if xy % 2 == 0 {
        vec![xy / 2, 2 * kk]
    } else {
        vec![xy, kk]
    };
    t.clone().reshape(shape)
}

pub fn reconstruct(d: &AtomicDecomposition) -> Tensor {
    let len = d.original_shape.iter().product();
    let mut out = vec![0.0; len];
    for (atom, &lambda) in d.atoms.iter().zip(&d.coefficients) {
        atom.accumulate(lambda, &mut out);
    }
    Tensor::new(d.original_shape.clone(), out).expect("decomposition shape is valid")
}
