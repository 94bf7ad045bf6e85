//! Minimizes `Σ λᵢ²/pᵢ` subject to `0 < pᵢ ≤ 1` and `Σ pᵢ = s`.
//!
//! The optimum saturates the `n_s` largest magnitudes at `pᵢ = 1` and spreads
//! the remaining budget proportionally over the tail:
//! `pᵢ = |λᵢ|(s − n_s) / Σ_tail |λⱼ|`, where `n_s` is the first count for which
//! the tail is `(s − n_s)`-balanced. Zero coefficients get `pᵢ = 0` and do
//! not consume budget.

use super::{ProbabilityVector, SparsityBudget};
use crate::error::{Error, Result};

struct Support {
    magnitudes: Vec<f64>,
    indices: Vec<usize>,
}

fn support(lambda: &[f64], s: SparsityBudget) -> Result<Support> {
    if let Some(index) = lambda.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let magnitudes: Vec<f64> = lambda.iter().map(|x| x.abs()).collect();
    let indices: Vec<usize> = (0..lambda.len()).filter(|&i| magnitudes[i] > 0.0).collect();
    if indices.is_empty() {
        return Err(Error::DegenerateInput("all coefficients are zero"));
    }
    if s.get() > indices.len() as f64 {
        return Err(Error::InfeasibleBudget {
            budget: s.get(),
            support: indices.len(),
        });
    }
    Ok(Support { magnitudes, indices })
}

/// Sort-then-scan solver, `O(n log n)`.
///
/// Magnitudes are visited in descending order, ties broken by ascending index.
pub fn atomo_probabilities_sorted(lambda: &[f64], s: SparsityBudget) -> Result<ProbabilityVector> {
    let Support { magnitudes: mag, indices: mut order } = support(lambda, s)?;
    // stable: equal magnitudes stay in index order
    order.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]));

    let mut tail = vec![0.0; order.len() + 1];
    for k in (0..order.len()).rev() {
        tail[k] = tail[k + 1] + mag[order[k]];
    }

    let mut p = vec![0.0; lambda.len()];
    let mut remaining = s.get();
    for (k, &i) in order.iter().enumerate() {
        if mag[i] * remaining <= tail[k] {
            for &j in &order[k..] {
                p[j] = mag[j] * remaining / tail[k];
            }
            break;
        }
        p[i] = 1.0;
        remaining -= 1.0;
    }
    Ok(ProbabilityVector(p))
}

/// Repeated max-selection solver, `O(s·n)`.
///
/// Each step scans the unvisited support once, picking the largest magnitude
/// (lowest index on ties) while summing the unvisited tail.
pub fn atomo_probabilities_select(lambda: &[f64], s: SparsityBudget) -> Result<ProbabilityVector> {
    let Support { magnitudes: mag, indices } = support(lambda, s)?;

    let mut p = vec![0.0; lambda.len()];
    let mut visited = vec![false; lambda.len()];
    let mut remaining = s.get();
    loop {
        let mut best: Option<usize> = None;
        let mut tail = 0.0;
        for &i in indices.iter().filter(|&&i| !visited[i]) {
            tail += mag[i];
            if best.is_none_or(|b| mag[i] > mag[b]) {
                best = Some(i);
            }
        }
        let Some(b) = best else { break };
        if mag[b] * remaining <= tail {
            for &i in indices.iter().filter(|&&i| !visited[i]) {
                p[i] = mag[i] * remaining / tail;
            }
            break;
        }
        p[b] = 1.0;
        visited[b] = true;
        remaining -= 1.0;
    }
    Ok(ProbabilityVector(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(s: f64) -> SparsityBudget {
        SparsityBudget::new(s).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn uniform_coefficients() {
        for solve in [atomo_probabilities_sorted, atomo_probabilities_select] {
            let p = solve(&[1.0, 1.0, 1.0, 1.0], budget(2.0)).unwrap();
            assert_close(p.as_slice(), &[0.5; 4], 1e-15);
        }
    }

    #[test]
    fn one_unbalanced_entry() {
        let two_thirds = 2.0 / 3.0;
        for solve in [atomo_probabilities_sorted, atomo_probabilities_select] {
            let p = solve(&[3.0, 1.0, 1.0, 1.0], budget(3.0)).unwrap();
            assert_close(p.as_slice(), &[1.0, two_thirds, two_thirds, two_thirds], 1e-15);
        }
    }

    #[test]
    fn zero_coefficient_gets_zero_probability() {
        for solve in [atomo_probabilities_sorted, atomo_probabilities_select] {
            let p = solve(&[4.0, 2.0, 0.0], budget(1.5)).unwrap();
            assert_close(p.as_slice(), &[1.0, 0.5, 0.0], 1e-15);
        }
    }

    #[test]
    fn full_budget_keeps_everything() {
        for solve in [atomo_probabilities_sorted, atomo_probabilities_select] {
            let p = solve(&[5.0, -0.1, 2.0], budget(3.0)).unwrap();
            assert_eq!(p.as_slice(), &[1.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn negative_coefficients_use_magnitudes() {
        let a = atomo_probabilities_sorted(&[-3.0, 1.0, -1.0, 1.0], budget(3.0)).unwrap();
        let b = atomo_probabilities_sorted(&[3.0, 1.0, 1.0, 1.0], budget(3.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_errors() {
        for solve in [atomo_probabilities_sorted, atomo_probabilities_select] {
            assert!(matches!(
                solve(&[1.0, 0.0, 2.0], budget(2.5)),
                Err(Error::InfeasibleBudget { support: 2, .. })
            ));
            assert!(matches!(
                solve(&[0.0, 0.0], budget(1.0)),
                Err(Error::DegenerateInput(_))
            ));
            assert!(matches!(
                solve(&[1.0, f64::NAN], budget(1.0)),
                Err(Error::NonFinite { index: 1 })
            ));
        }
        assert!(matches!(SparsityBudget::new(0.0), Err(Error::InvalidBudget(_))));
        assert!(matches!(SparsityBudget::new(-1.0), Err(Error::InvalidBudget(_))));
        assert!(matches!(SparsityBudget::new(f64::NAN), Err(Error::InvalidBudget(_))));
    }

    #[test]
    fn ties_at_the_top_saturate_together() {
        for solve in [atomo_probabilities_sorted, atomo_probabilities_select] {
            let p = solve(&[3.0, 1.0, 3.0], budget(2.5)).unwrap();
            assert_close(p.as_slice(), &[1.0, 0.5, 1.0], 1e-15);
        }
    }
}
