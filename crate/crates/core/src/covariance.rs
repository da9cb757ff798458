//! Parameter covariance for the transformed coefficients.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Result};
use crate::gram::centered_gram;
use crate::moments::StandardizationPlan;
use crate::sparse::{default_workers, SparseDesign, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    None,
    #[default]
    Homoskedastic,
    /// White's heteroskedasticity-consistent sandwich, no small-sample correction.
    Hc,
}

impl fmt::Display for CovarianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovarianceKind::None => "none",
            CovarianceKind::Homoskedastic => "homoskedastic",
            CovarianceKind::Hc => "hc",
        })
    }
}

impl FromStr for CovarianceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(CovarianceKind::None),
            "homoskedastic" => Ok(CovarianceKind::Homoskedastic),
            "hc" | "hc0" => Ok(CovarianceKind::Hc),
            other => Err(format!(
                "unknown covariance kind '{other}' (expected none, homoskedastic or hc)"
            )),
        }
    }
}

/// `(M̃ᵀWM̃)⁻¹ k̂²`.
pub fn cov_homoskedastic(gram_inverse: &SymMatrix, k_hat_sq: f64) -> SymMatrix {
    gram_inverse.scaled(k_hat_sq)
}

pub fn cov_hc(
    m: &SparseDesign,
    w: &[f64],
    residuals: &[f64],
    plan: &StandardizationPlan,
    gram_inverse: &SymMatrix,
) -> Result<SymMatrix> {
    cov_hc_with(m, w, residuals, plan, gram_inverse, default_workers())
}

/// `G⁻¹ (M̃ᵀ diag(w ∘ ε²) M̃) G⁻¹`.
///
/// The inner matrix is the same centered Gram expansion as the fit, evaluated
/// with weights `w ∘ ε²` but keeping the fit's means and scales.
pub fn cov_hc_with(
    m: &SparseDesign,
    w: &[f64],
    residuals: &[f64],
    plan: &StandardizationPlan,
    gram_inverse: &SymMatrix,
    workers: usize,
) -> Result<SymMatrix> {
    check_len("residuals against matrix rows", m.n_rows(), residuals.len())?;
    check_len("weights against matrix rows", m.n_rows(), w.len())?;
    check_len("Gram inverse against matrix columns", m.n_cols(), gram_inverse.order())?;
    check_finite("residuals", residuals)?;
    let inner_w: Vec<f64> = w
        .iter()
        .zip(residuals)
        .map(|(wi, e)| wi * e * e)
        .collect();
    let inner = centered_gram(m, &inner_w, plan, workers)?;
    Ok(gram_inverse.sandwich(&inner))
}
