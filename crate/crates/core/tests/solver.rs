mod common;

use atomo_core::sparsifier::{
    atomo_probabilities_select, atomo_probabilities_sorted, expected_second_moment, is_s_balanced,
    optimal_second_moment_lower_bound, SparsityBudget,
};
use atomo_core::Error;
use common::{brute_force_min, coordinate_descent_min};
use proptest::prelude::*;

fn budget(s: f64) -> SparsityBudget {
    SparsityBudget::new(s).unwrap()
}

fn f(lambda: &[f64], s: f64) -> f64 {
    let p = atomo_probabilities_sorted(lambda, budget(s)).unwrap();
    expected_second_moment(lambda, &p).unwrap()
}

/// Coefficients with at least one nonzero entry, and a feasible budget.
fn instance(max_len: usize) -> impl Strategy<Value = (Vec<f64>, f64)> {
    prop::collection::vec(prop_oneof![3 => -10.0..10.0f64, 1 => Just(0.0), 1 => (-5i32..=5).prop_map(f64::from)], 1..=max_len)
        .prop_filter("needs a nonzero", |v| v.iter().any(|&x| x != 0.0))
        .prop_flat_map(|v| {
            let nnz = v.iter().filter(|&&x| x != 0.0).count() as f64;
            (Just(v), (1e-3..=1.0f64).prop_map(move |t| t * nnz))
        })
}

#[test]
fn worked_example() {
    let p = atomo_probabilities_sorted(&[3.0, 1.0, 1.0, 1.0], budget(3.0)).unwrap();
    let expected = [1.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0];
    for (a, b) in p.as_slice().iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!((f(&[3.0, 1.0, 1.0, 1.0], 3.0) - 13.5).abs() < 1e-12);
    assert_eq!(atomo_probabilities_sorted(&[1.0, 1.0], budget(2.0)).unwrap().as_slice(), [1.0, 1.0]);
}

#[test]
fn error_cases() {
    assert!(matches!(
        atomo_probabilities_sorted(&[1.0, 2.0, 0.0, 3.0], budget(4.0)),
        Err(Error::InfeasibleBudget { support: 3, .. })
    ));
    assert!(matches!(atomo_probabilities_select(&[0.0, 0.0], budget(1.0)), Err(Error::DegenerateInput(_))));
    assert!(matches!(atomo_probabilities_sorted(&[1.0, f64::NAN], budget(1.0)), Err(Error::NonFinite { index: 1 })));
    assert!(SparsityBudget::new(0.0).is_err());
    assert!(SparsityBudget::new(-1.0).is_err());
    assert!(SparsityBudget::new(f64::INFINITY).is_err());
}

#[test]
fn zeros_get_zero_probability() {
    let p = atomo_probabilities_sorted(&[0.0, 4.0, 0.0, -1.0], budget(1.5)).unwrap();
    assert_eq!(p.as_slice()[0], 0.0);
    assert_eq!(p.as_slice()[2], 0.0);
    assert!((p.sum() - 1.5).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn matches_exhaustive_oracle((lambda, s) in instance(6)) {
        let ours = f(&lambda, s);
        let oracle = brute_force_min(&lambda, s);
        prop_assert!(ours <= oracle + 1e-9 * oracle.max(1.0), "{} vs {}", ours, oracle);
        prop_assert!(oracle <= coordinate_descent_min(&lambda, s) + 1e-6 * oracle.max(1.0));
    }

    #[test]
    fn variants_agree((lambda, s) in instance(64)) {
        let a = atomo_probabilities_sorted(&lambda, budget(s)).unwrap();
        let b = atomo_probabilities_select(&lambda, budget(s)).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn budget_and_box_constraints((lambda, s) in instance(64)) {
        let p = atomo_probabilities_sorted(&lambda, budget(s)).unwrap();
        prop_assert!((p.sum() - s).abs() <= 1e-9 * s.max(1.0));
        for (pi, li) in p.as_slice().iter().zip(&lambda) {
            prop_assert!((0.0..=1.0).contains(pi));
            prop_assert_eq!(*pi == 0.0, *li == 0.0);
        }
    }

    #[test]
    fn kkt_structure((lambda, s) in instance(64)) {
        // pinned coordinates dominate the rest, which are proportional to |λ|
        let p = atomo_probabilities_sorted(&lambda, budget(s)).unwrap();
        let p = p.as_slice();
        let free: Vec<usize> = (0..p.len()).filter(|&i| p[i] < 1.0 && lambda[i] != 0.0).collect();
        let pinned: Vec<usize> = (0..p.len()).filter(|&i| p[i] == 1.0).collect();
        if let Some(&i0) = free.first() {
            let ratio = p[i0] / lambda[i0].abs();
            for &i in &free {
                prop_assert!((p[i] / lambda[i].abs() - ratio).abs() <= 1e-9 * ratio);
            }
            let max_free = free.iter().map(|&i| lambda[i].abs()).fold(0.0, f64::max);
            for &j in &pinned {
                prop_assert!(lambda[j].abs() >= max_free - 1e-12);
            }
        }
    }

    #[test]
    fn permutation_equivariant((lambda, s) in instance(32), seed in any::<u64>()) {
        let n = lambda.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut state = seed;
        for i in (1..n).rev() {
            state = atomo_core::sparsifier::splitmix64(state);
            perm.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let shuffled: Vec<f64> = perm.iter().map(|&i| lambda[i]).collect();
        let p = atomo_probabilities_sorted(&lambda, budget(s)).unwrap();
        let q = atomo_probabilities_sorted(&shuffled, budget(s)).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!((q.as_slice()[k] - p.as_slice()[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn scale_and_sign_invariant((lambda, s) in instance(32), c in 1e-3..1e3f64) {
        let scaled: Vec<f64> = lambda.iter().map(|x| -c * x).collect();
        let p = atomo_probabilities_sorted(&lambda, budget(s)).unwrap();
        let q = atomo_probabilities_sorted(&scaled, budget(s)).unwrap();
        for (a, b) in p.as_slice().iter().zip(q.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn lower_bound_and_balanced_closed_form((lambda, s) in instance(64)) {
        let ours = f(&lambda, s);
        let bound = optimal_second_moment_lower_bound(&lambda, budget(s));
        prop_assert!(ours >= bound * (1.0 - 1e-12));
        if is_s_balanced(&lambda, budget(s)).unwrap() {
            prop_assert!((ours - bound).abs() <= 1e-12 * bound);
        }
    }

    #[test]
    fn more_budget_never_hurts((lambda, s) in instance(32), t in 0.0..1.0f64) {
        let nnz = lambda.iter().filter(|&&x| x != 0.0).count() as f64;
        let bigger = s + t * (nnz - s);
        prop_assert!(f(&lambda, bigger) <= f(&lambda, s) * (1.0 + 1e-12));
    }
}
