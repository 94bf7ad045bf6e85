//! Thin singular value decomposition by one-sided (Hestenes) Jacobi rotations.
//!
//! Columns of the working matrix are rotated pairwise until every pair is
//! numerically orthogonal; the column norms are then the singular values and
//! the accumulated rotations are the right singular vectors.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one are dropped.
pub const TRUNCATION_RATIO: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Absolute floor on off-diagonal Gram entries, relative to `‖X‖_F²`.
/// Pairs below it are never rotated, which stops the sweep from chasing
/// rounding noise left in the null space of rank-deficient inputs.
const ABSOLUTE_FLOOR: f64 = 1e-28;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdResult {
    /// Left singular vectors, each of length `rows`.
    pub u_vectors: Vec<Vec<f64>>,
    /// Nonincreasing, strictly above the truncation threshold.
    pub singular_values: Vec<f64>,
    /// Right singular vectors, each of length `cols`.
    pub v_vectors: Vec<Vec<f64>>,
    pub rank: usize,
}

impl SvdResult {
    pub fn reconstruct(&self, rows: usize, cols: usize) -> Tensor {
        let mut out = vec![0.0; rows * cols];
        for ((u, v), &sigma) in self.u_vectors.iter().zip(&self.v_vectors).zip(&self.singular_values) {
            add_outer(&mut out, sigma, u, v);
        }
        Tensor::matrix(rows, cols, out).expect("reconstruction is finite")
    }
}

pub(crate) fn add_outer(out: &mut [f64], weight: f64, u: &[f64], v: &[f64]) {
    let m = v.len();
    for (i, &ui) in u.iter().enumerate() {
        let scale = weight * ui;
        if scale == 0.0 {
            continue;
        }
        for (o, &vj) in out[i * m..(i + 1) * m].iter_mut().zip(v) {
            *o += scale * vj;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn svd(m: &Tensor) -> Result<SvdResult> {
    let (rows, cols) = m.matrix_dims()?;
    if rows >= cols {
        jacobi_tall(m.data(), rows, cols)
    } else {
        let t = m.transpose()?;
        let r = jacobi_tall(t.data(), cols, rows)?;
        // X^T = U S V^T  =>  X = V S U^T
        let mut out = SvdResult {
            u_vectors: r.v_vectors,
            singular_values: r.singular_values,
            v_vectors: r.u_vectors,
            rank: r.rank,
        };
        fix_signs(&mut out);
        Ok(out)
    }
}

/// Jacobi SVD of a row-major `rows x cols` matrix with `rows >= cols`.
fn jacobi_tall(data: &[f64], rows: usize, cols: usize) -> Result<SvdResult> {
    // column-major working copy
    let mut a: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| data[i * cols + j]).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; cols];
            e[j] = 1.0;
            e
        })
        .collect();

    let frob2: f64 = data.iter().map(|x| x * x).sum();
    let relative_tol = rows.max(1) as f64 * f64::EPSILON;
    let floor = ABSOLUTE_FLOOR * frob2;

    let mut converged = frob2 == 0.0;
    let mut sweeps = 0;
    let mut sq_norms = vec![0.0; cols];
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::SvdNoConvergence { sweeps });
        }
        sweeps += 1;
        converged = true;
        // refreshed every sweep, tracked through rotations within it
        for (n, col) in sq_norms.iter_mut().zip(&a) {
            *n = dot(col, col);
        }
        for p in 0..cols {
            for q in p + 1..cols {
                let (alpha, beta) = (sq_norms[p], sq_norms[q]);
                let scale = (alpha * beta).sqrt();
                // |γ| ≤ √(αβ), so negligible pairs are skipped without a dot product
                if scale <= floor {
                    continue;
                }
                let gamma = dot(&a[p], &a[q]);
                if gamma.abs() <= floor || gamma.abs() <= relative_tol * scale {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
                sq_norms[p] = (alpha - t * gamma).max(0.0);
                sq_norms[q] = (beta + t * gamma).max(0.0);
            }
        }
    }

    let norms: Vec<f64> = a.iter().map(|col| dot(col, col).sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let sigma_max = order.first().map_or(0.0, |&i| norms[i]);
    let threshold = TRUNCATION_RATIO * sigma_max;
    let mut out = SvdResult {
        u_vectors: Vec::new(),
        singular_values: Vec::new(),
        v_vectors: Vec::new(),
        rank: 0,
    };
    for &j in &order {
        let sigma = norms[j];
        if sigma == 0.0 || sigma < threshold {
            break;
        }
        out.u_vectors.push(a[j].iter().map(|x| x / sigma).collect());
        out.v_vectors.push(std::mem::take(&mut v[j]));
        out.singular_values.push(sigma);
    }
    out.rank = out.singular_values.len();
    fix_signs(&mut out);
    Ok(out)
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Makes the first non-negligible entry of every `u` nonnegative, flipping
/// the paired `v` to compensate.
fn fix_signs(r: &mut SvdResult) {
    for (u, v) in r.u_vectors.iter_mut().zip(r.v_vectors.iter_mut()) {
        let lead = u.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(0.0);
        if lead < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}
