//! Sparsifying the singular values of a gradient matrix, and deciding when
//! that beats sparsifying its entries at equal communication cost.

use serde::{Deserialize, Serialize};

use crate::atoms::{decompose_entrywise, decompose_svd, svd, Tensor};
use crate::error::{Error, Result};
use crate::sparsifier::{
    atomo_probabilities_sorted, expected_second_moment, is_s_balanced, optimal_second_moment_lower_bound,
    sample_sparsification, RngStream, SparsifiedGradient, SparsityBudget,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixNorms {
    /// `Σ |Xᵢⱼ|`
    pub l11: f64,
    /// `max |Xᵢⱼ|`
    pub lmax: f64,
    /// `Σ σᵢ`
    pub nuclear: f64,
    /// `σ₁`
    pub spectral: f64,
    pub frobenius: f64,
}

pub fn matrix_norms(x: &Tensor) -> Result<MatrixNorms> {
    let r = svd(x)?;
    Ok(MatrixNorms {
        l11: x.data().iter().map(|v| v.abs()).sum(),
        lmax: x.data().iter().fold(0.0, |m, v| m.max(v.abs())),
        nuclear: r.singular_values.iter().sum(),
        spectral: r.singular_values.first().copied().unwrap_or(0.0),
        frobenius: x.frobenius_norm(),
    })
}

/// Spectral-ATOMO: optimal probabilities on the singular values, then
/// Bernoulli sampling of the singular triplets.
pub fn spectral_atomo(
    x: &Tensor,
    s_prime: SparsityBudget,
    rng: &mut RngStream,
) -> Result<SparsifiedGradient> {
    let d = decompose_svd(x)?;
    let p = atomo_probabilities_sorted(&d.coefficients, s_prime)?;
    sample_sparsification(&d, &p, rng)
}

/// Entry-wise ATOMO at budget `s` against Spectral-ATOMO at `s' = s/(n+m)`.
///
/// Costs are in reals transmitted, counting `s` per entry-wise message and
/// `s'(n+m)` per SVD message. Second moments are the closed forms
/// `‖X‖₁,₁²/s` and `‖X‖_*²/s'` when the matching regime is balanced, and the
/// solver's attained `Σλᵢ²/pᵢ` otherwise. A budget larger than the atom
/// support saturates at `pᵢ = 1`, i.e. `‖X‖_F²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsificationComparison {
    pub budget_entrywise: f64,
    pub budget_svd: f64,
    pub comm_cost_entrywise: f64,
    pub comm_cost_svd: f64,
    pub second_moment_entrywise: f64,
    pub second_moment_svd: f64,
    /// `(n+m)‖X‖_*² ≤ ‖X‖₁,₁²` when both regimes are balanced; otherwise the
    /// ordering of the reported second moments.
    pub svd_wins: bool,
    pub entrywise_balanced: bool,
    pub svd_balanced: bool,
}

fn attained_second_moment(lambda: &[f64], s: SparsityBudget, balanced: bool) -> Result<f64> {
    if balanced {
        return Ok(optimal_second_moment_lower_bound(lambda, s));
    }
    match atomo_probabilities_sorted(lambda, s) {
        Ok(p) => expected_second_moment(lambda, &p),
        Err(Error::InfeasibleBudget { .. }) => Ok(lambda.iter().map(|l| l * l).sum()),
        Err(e) => Err(e),
    }
}

pub fn compare_costs(x: &Tensor, s: SparsityBudget) -> Result<SparsificationComparison> {
    let (n, m) = x.matrix_dims()?;
    let entries = decompose_entrywise(x).coefficients;
    let sigma = svd(x)?.singular_values;
    if sigma.is_empty() {
        return Err(Error::DegenerateInput("matrix is zero"));
    }
    let dims = (n + m) as f64;
    let s_prime = SparsityBudget::new(s.get() / dims)?;

    let entrywise_balanced = is_s_balanced(&entries, s)?;
    let svd_balanced = is_s_balanced(&sigma, s_prime)?;
    let second_moment_entrywise = attained_second_moment(&entries, s, entrywise_balanced)?;
    let second_moment_svd = attained_second_moment(&sigma, s_prime, svd_balanced)?;

    let svd_wins = if entrywise_balanced && svd_balanced {
        let l11: f64 = entries.iter().map(|v| v.abs()).sum();
        let nuclear: f64 = sigma.iter().sum();
        dims * nuclear * nuclear <= l11 * l11
    } else {
        second_moment_svd <= second_moment_entrywise
    };

    Ok(SparsificationComparison {
        budget_entrywise: s.get(),
        budget_svd: s_prime.get(),
        comm_cost_entrywise: s.get(),
        comm_cost_svd: s_prime.get() * dims,
        second_moment_entrywise,
        second_moment_svd,
        svd_wins,
        entrywise_balanced,
        svd_balanced,
    })
}
