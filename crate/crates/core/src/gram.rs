//! Normal equations for the centered and scaled design `M̃ = (M - 1μᵀ)Σ`
//! assembled without ever forming `M̃`.
//!
//! Expanding `M̃ᵀWM̃` gives
//!
//! ```text
//! Σ(MᵀWM)Σ  -  (ΣMᵀW1)(μᵀΣ)  -  (Σμ)(1ᵀWMΣ)  +  (Σμ)(1ᵀW1)(μᵀΣ)
//! ```
//!
//! The first term is the sparse weighted Gram. `ΣMᵀW1` is a vector of scaled
//! weighted column sums `u`, `Σμ` is the elementwise product `v`, and `1ᵀW1`
//! is the weight total, so the last three terms are the rank-two correction
//! `-(uvᵀ + vuᵀ)` plus the rank-one correction `Σw·vvᵀ`. The right-hand side
//! is `Σ(MᵀWy) - v·(1ᵀWy)`.

use crate::error::{check_finite, check_len, check_weights, Result};
use crate::moments::{weight_aggregates, StandardizationPlan};
use crate::sparse::{
    default_workers, transpose_apply, weighted_column_sums, weighted_gram_upper_with,
    SparseDesign, SymMatrix,
};

/// `M̃ᵀWM̃` and `M̃ᵀWy` plus the aggregates they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquations {
    pub gram: SymMatrix,
    pub rhs: Vec<f64>,
    pub sum_w: f64,
    pub sum_wy: f64,
    pub n_obs: usize,
    pub plan: StandardizationPlan,
}

/// `scale[j] * Σ_i w_i M[i,j]`.
pub fn scaled_colsums(m: &SparseDesign, w: &[f64], plan: &StandardizationPlan) -> Result<Vec<f64>> {
    check_len("plan against matrix columns", m.n_cols(), plan.n_cols())?;
    let sums = weighted_column_sums(m, w)?;
    Ok(sums.iter().zip(&plan.scale).map(|(c, s)| c * s).collect())
}

/// Adds `-(u vᵀ + v uᵀ)` to the upper triangle of `target`.
pub fn add_cross_correction(target: &mut SymMatrix, u: &[f64], v: &[f64]) -> Result<()> {
    check_len("correction vector", target.order(), u.len())?;
    check_len("correction vector", target.order(), v.len())?;
    let p = target.order();
    for j in 0..p {
        for k in j..p {
            target.add(j, k, -(u[j] * v[k] + v[j] * u[k]));
        }
    }
    Ok(())
}

/// Adds `sum_w · v vᵀ` to the upper triangle of `target`.
pub fn add_outer_correction(target: &mut SymMatrix, v: &[f64], sum_w: f64) -> Result<()> {
    check_len("correction vector", target.order(), v.len())?;
    let p = target.order();
    for j in 0..p {
        let vj = sum_w * v[j];
        for k in j..p {
            target.add(j, k, vj * v[k]);
        }
    }
    Ok(())
}

/// The cross correction `-(u vᵀ + v uᵀ)` as a standalone matrix.
pub fn cross_correction(u: &[f64], v: &[f64]) -> Result<SymMatrix> {
    check_len("correction vectors", u.len(), v.len())?;
    let mut out = SymMatrix::zeros(u.len());
    add_cross_correction(&mut out, u, v)?;
    Ok(out)
}

/// The outer correction `sum_w · v vᵀ` as a standalone matrix.
pub fn outer_correction(v: &[f64], sum_w: f64) -> Result<SymMatrix> {
    let mut out = SymMatrix::zeros(v.len());
    add_outer_correction(&mut out, v, sum_w)?;
    Ok(out)
}

/// `Σ(MᵀWM)Σ` with the scaling applied to rows and columns of the `p x p`
/// result rather than to the stored entries of `M`.
fn scaled_sparse_gram(
    m: &SparseDesign,
    w: &[f64],
    plan: &StandardizationPlan,
    workers: usize,
) -> Result<SymMatrix> {
    let mut gram = weighted_gram_upper_with(m, w, workers)?;
    let p = m.n_cols();
    if plan.scale.iter().any(|&s| s != 1.0) {
        for j in 0..p {
            for k in j..p {
                let v = gram.get(j, k) * plan.scale[j] * plan.scale[k];
                gram.set(j, k, v);
            }
        }
    }
    Ok(gram)
}

/// `M̃ᵀ diag(w) M̃` for an arbitrary nonnegative weight vector, with `M̃`
/// defined by `plan`. The plan is not recomputed from `w`.
pub fn centered_gram(
    m: &SparseDesign,
    w: &[f64],
    plan: &StandardizationPlan,
    workers: usize,
) -> Result<SymMatrix> {
    check_len("weights against matrix rows", m.n_rows(), w.len())?;
    check_len("plan against matrix columns", m.n_cols(), plan.n_cols())?;
    check_weights(w)?;
    let mut gram = scaled_sparse_gram(m, w, plan, workers)?;
    if plan.means.iter().any(|&mu| mu != 0.0) {
        let u = scaled_colsums(m, w, plan)?;
        let v = plan.scaled_means();
        let sum_w: f64 = w.iter().sum();
        add_cross_correction(&mut gram, &u, &v)?;
        add_outer_correction(&mut gram, &v, sum_w)?;
    }
    Ok(gram)
}

pub fn build_normal_equations(
    m: &SparseDesign,
    y: &[f64],
    w: &[f64],
    plan: &StandardizationPlan,
) -> Result<NormalEquations> {
    build_normal_equations_with(m, y, w, plan, default_workers())
}

pub fn build_normal_equations_with(
    m: &SparseDesign,
    y: &[f64],
    w: &[f64],
    plan: &StandardizationPlan,
    workers: usize,
) -> Result<NormalEquations> {
    check_len("response against matrix rows", m.n_rows(), y.len())?;
    check_len("weights against matrix rows", m.n_rows(), w.len())?;
    check_len("plan against matrix columns", m.n_cols(), plan.n_cols())?;
    m.check_finite()?;
    check_finite("response", y)?;
    check_weights(w)?;
    check_finite("plan means", &plan.means)?;
    check_finite("plan scale", &plan.scale)?;

    let gram = centered_gram(m, w, plan, workers)?;

    let agg = weight_aggregates(w, y)?;
    let v = plan.scaled_means();
    let rhs = transpose_apply(m, &agg.wy)?
        .iter()
        .zip(plan.scale.iter().zip(&v))
        .map(|(t, (s, vj))| s * t - vj * agg.sum_wy)
        .collect();

    Ok(NormalEquations {
        gram,
        rhs,
        sum_w: agg.sum_w,
        sum_wy: agg.sum_wy,
        n_obs: m.n_rows(),
        plan: plan.clone(),
    })
}
