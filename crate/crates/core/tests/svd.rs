mod common;

use atomo_core::atoms::{decompose_svd, reconstruct, svd, AtomDescriptor, Tensor};
use atomo_core::sparsifier::RngStream;
use common::{gram_singular_values, random_matrix};
use proptest::prelude::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn assert_orthonormal(vectors: &[Vec<f64>], tol: f64) {
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((dot(a, b) - want).abs() <= tol, "<{i},{j}> = {}", dot(a, b));
        }
    }
}

#[test]
fn large_random_matrices() {
    let mut rng = RngStream::new(20, 0, 0, 0);
    for (n, m) in [(64, 64), (64, 9), (9, 64), (40, 33), (1, 50), (50, 1)] {
        let x = random_matrix(&mut rng, n, m);
        let r = svd(&x).unwrap();
        assert_eq!(r.rank, n.min(m));
        assert!(r.reconstruct(n, m).relative_error(&x) <= 1e-12);
        assert_orthonormal(&r.u_vectors, 1e-12);
        assert_orthonormal(&r.v_vectors, 1e-12);
        assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn low_rank_product_is_truncated() {
    let mut rng = RngStream::new(21, 0, 0, 0);
    let a = random_matrix(&mut rng, 30, 3);
    let b = random_matrix(&mut rng, 3, 20);
    let data = (0..600).map(|k| (0..3).map(|t| a.get(k / 20, t) * b.get(t, k % 20)).sum()).collect();
    let x = Tensor::matrix(30, 20, data).unwrap();
    let r = svd(&x).unwrap();
    assert_eq!(r.rank, 3);
    assert!(r.reconstruct(30, 20).relative_error(&x) <= 1e-12);
    assert_orthonormal(&r.u_vectors, 1e-12);
}

#[test]
fn matches_gram_oracle_on_small_matrices() {
    let mut rng = RngStream::new(22, 0, 0, 0);
    for n in 1..=8 {
        for m in 1..=8 {
            let x = random_matrix(&mut rng, n, m);
            let ours = svd(&x).unwrap().singular_values;
            for (a, b) in ours.iter().zip(gram_singular_values(&x)) {
                assert!((a - b).abs() <= 1e-10, "{n}x{m}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn svd_atoms_are_orthonormal_and_reconstruct() {
    let mut rng = RngStream::new(23, 0, 0, 0);
    let x = random_matrix(&mut rng, 6, 4);
    let d = decompose_svd(&x).unwrap();
    for (i, a) in d.atoms.iter().enumerate() {
        for (j, b) in d.atoms.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((a.inner(b) - want).abs() < 1e-12);
        }
        assert!(matches!(a, AtomDescriptor::RankOne { u, v } if u.len() == 6 && v.len() == 4));
    }
    assert!(reconstruct(&d).relative_error(&x) < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reconstructs_random_matrices(n in 1usize..12, m in 1usize..12, seed in any::<u64>()) {
        let x = random_matrix(&mut RngStream::from_seed(seed), n, m);
        let r = svd(&x).unwrap();
        prop_assert!(r.reconstruct(n, m).relative_error(&x) <= 1e-12);
    }

    #[test]
    fn transpose_and_scale_preserve_spectrum(n in 1usize..10, m in 1usize..10, seed in any::<u64>(), c in -100.0..100.0f64) {
        prop_assume!(c.abs() > 1e-3);
        let x = random_matrix(&mut RngStream::from_seed(seed), n, m);
        let a = svd(&x).unwrap().singular_values;
        let b = svd(&x.transpose().unwrap()).unwrap().singular_values;
        let scaled = Tensor::matrix(n, m, x.data().iter().map(|v| c * v).collect()).unwrap();
        let s = svd(&scaled).unwrap().singular_values;
        prop_assert_eq!(a.len(), b.len());
        for ((x, y), z) in a.iter().zip(&b).zip(&s) {
            prop_assert!((x - y).abs() <= 1e-12 * a[0]);
            prop_assert!((c.abs() * x - z).abs() <= 1e-12 * c.abs() * a[0]);
        }
    }
}
