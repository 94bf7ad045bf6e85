#![allow(dead_code)]

use atomo_core::atoms::Tensor;
use atomo_core::sparsifier::RngStream;
use rand::Rng;

pub fn f_of(lambda: &[f64], p: &[f64]) -> f64 {
    lambda
        .iter()
        .zip(p)
        .filter(|(l, _)| **l != 0.0)
        .map(|(l, p)| if *p > 0.0 { l * l / p } else { f64::INFINITY })
        .sum()
}

/// Exhaustive search over every set `S` of coordinates pinned at `p = 1`,
/// with the rest proportional to `|λᵢ|`. Returns the smallest feasible
/// objective.
pub fn brute_force_min(lambda: &[f64], s: f64) -> f64 {
    let n = lambda.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        let pinned = mask.count_ones() as f64;
        if pinned > s + 1e-12 {
            continue;
        }
        let rest: f64 = (0..n).filter(|i| mask & (1 << i) == 0).map(|i| lambda[i].abs()).sum();
        let left = s - pinned;
        let mut p = vec![0.0; n];
        let mut ok = true;
        for i in 0..n {
            if mask & (1 << i) != 0 {
                p[i] = 1.0;
            } else if rest > 0.0 {
                p[i] = lambda[i].abs() * left / rest;
                if p[i] > 1.0 + 1e-12 {
                    ok = false;
                }
            } else if left > 1e-12 {
                ok = false;
            }
        }
        if ok {
            best = best.min(f_of(lambda, &p));
        }
    }
    best
}

/// Pairwise coordinate descent on `Σ λᵢ²/pᵢ` over `{Σp = s, 0 < p ≤ 1}`,
/// restricted to the nonzero coordinates.
pub fn coordinate_descent_min(lambda: &[f64], s: f64) -> f64 {
    let support: Vec<usize> = (0..lambda.len()).filter(|&i| lambda[i] != 0.0).collect();
    let k = support.len();
    let a: Vec<f64> = support.iter().map(|&i| lambda[i] * lambda[i]).collect();
    let mut p = vec![s / k as f64; k];
    let lo = 1e-15;
    for _ in 0..2000 {
        let mut moved = 0.0f64;
        for i in 0..k {
            for j in i + 1..k {
                let c = p[i] + p[j];
                let (ra, rb) = (a[i].sqrt(), a[j].sqrt());
                let x = (c * ra / (ra + rb)).clamp((c - 1.0).max(lo), 1.0f64.min(c - lo));
                moved = moved.max((x - p[i]).abs());
                p[i] = x;
                p[j] = c - x;
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    a.iter().zip(&p).map(|(a, p)| a / p).sum()
}

pub fn random_vec(rng: &mut RngStream, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn random_matrix(rng: &mut RngStream, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, random_vec(rng, rows * cols, -1.0, 1.0)).unwrap()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// descending.
pub fn symmetric_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    for _ in 0..200 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let total: f64 = a.iter().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Singular values from the eigenvalues of the smaller Gram matrix.
/// Eigenvalues within the oracle's own rounding error of zero are reported
/// as exact zeros; their square roots would otherwise be noise of order
/// `√ε·σ₁`.
pub fn gram_singular_values(x: &Tensor) -> Vec<f64> {
    let (r, c) = x.matrix_dims().unwrap();
    let k = r.min(c);
    let mut g = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            g[i * k + j] = if r >= c {
                (0..r).map(|t| x.get(t, i) * x.get(t, j)).sum()
            } else {
                (0..c).map(|t| x.get(i, t) * x.get(j, t)).sum()
            };
        }
    }
    let ev = symmetric_eigenvalues(g, k);
    let noise = 64.0 * k as f64 * f64::EPSILON * ev.first().copied().unwrap_or(0.0);
    ev.into_iter().map(|e| if e <= noise { 0.0 } else { e.sqrt() }).collect()
}

pub fn narrow(v: f64) -> f64 {
    v as f32 as f64
}
