//! Solving the centered normal equations, mapping coefficients back to the
//! raw design, and the `fit` pipeline that ties the stages together.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::covariance::{cov_hc_with, cov_homoskedastic, CovarianceKind};
use crate::error::{check_finite, check_len, check_weights, Error, Result, Stage};
use crate::gram::{build_normal_equations_with, NormalEquations};
use crate::moments::{compute_plan, StandardizationPlan};
use crate::sparse::{default_workers, SparseDesign, SymMatrix};

/// How `solve_transformed` inverts the Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    /// Cholesky first, eigen pseudoinverse if a pivot falls below the cutoff.
    #[default]
    Auto,
    /// Always use the eigendecomposition pseudoinverse.
    Pseudoinverse,
}

/// Which factorization produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factorization {
    Cholesky,
    Eigen,
    /// Singular value decomposition; used by the dense reference solver.
    Svd,
}

/// Residual sum of squares used for `k̂²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualWeighting {
    /// `Σ w_i ε_i² / (n - p)`.
    #[default]
    Weighted,
    /// `Σ ε_i² / (n - p)` regardless of the weights.
    Unweighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub beta: Vec<f64>,
    pub gram_inverse: SymMatrix,
    pub rank: usize,
    pub factorization: Factorization,
}

/// Eigenvalue (and Cholesky pivot) cutoff: `p · ε · max(diag G)`.
pub fn rank_cutoff(gram: &SymMatrix) -> f64 {
    let max_diag = gram.diagonal().into_iter().fold(0.0_f64, f64::max);
    gram.order() as f64 * f64::EPSILON * max_diag
}

pub fn solve_transformed(eqs: &NormalEquations) -> Result<Solution> {
    solve_transformed_with(eqs, SolveMethod::Auto)
}

pub fn solve_transformed_with(eqs: &NormalEquations, method: SolveMethod) -> Result<Solution> {
    if eqs.sum_w <= 0.0 {
        return Err(Error::ZeroWeightSum);
    }
    check_len("right-hand side against Gram order", eqs.gram.order(), eqs.rhs.len())?;
    check_finite("Gram matrix", eqs.gram.packed())?;
    check_finite("right-hand side", &eqs.rhs)?;

    let cutoff = rank_cutoff(&eqs.gram);
    if method == SolveMethod::Auto {
        if let Some(solution) = cholesky_solve(&eqs.gram, &eqs.rhs, cutoff) {
            return Ok(solution);
        }
    }
    Ok(eigen_solve(&eqs.gram, &eqs.rhs, cutoff))
}

/// `G = RᵀR` with upper-triangular `R`; `None` when a pivot is at or below
/// `cutoff`.
fn cholesky_solve(gram: &SymMatrix, rhs: &[f64], cutoff: f64) -> Option<Solution> {
    let p = gram.order();
    let mut r = vec![0.0; p * p];
    for j in 0..p {
        let mut d = gram.get(j, j);
        for l in 0..j {
            d -= r[l * p + j] * r[l * p + j];
        }
        if d <= cutoff || !d.is_finite() {
            return None;
        }
        let pivot = d.sqrt();
        r[j * p + j] = pivot;
        for k in j + 1..p {
            let mut s = gram.get(j, k);
            for l in 0..j {
                s -= r[l * p + j] * r[l * p + k];
            }
            r[j * p + k] = s / pivot;
        }
    }

    // Rᵀz = b, then Rβ = z.
    let mut z = rhs.to_vec();
    for j in 0..p {
        for l in 0..j {
            z[j] -= r[l * p + j] * z[l];
        }
        z[j] /= r[j * p + j];
    }
    let mut beta = z;
    for j in (0..p).rev() {
        for k in j + 1..p {
            beta[j] -= r[j * p + k] * beta[k];
        }
        beta[j] /= r[j * p + j];
    }

    // R⁻¹ column by column, then G⁻¹ = R⁻¹R⁻ᵀ.
    let mut r_inv = vec![0.0; p * p];
    for c in 0..p {
        r_inv[c * p + c] = 1.0 / r[c * p + c];
        for j in (0..c).rev() {
            let mut s = 0.0;
            for k in j + 1..=c {
                s += r[j * p + k] * r_inv[k * p + c];
            }
            r_inv[j * p + c] = -s / r[j * p + j];
        }
    }
    let mut inverse = SymMatrix::zeros(p);
    for j in 0..p {
        for k in j..p {
            let s: f64 = (k..p).map(|l| r_inv[j * p + l] * r_inv[k * p + l]).sum();
            inverse.set(j, k, s);
        }
    }

    Some(Solution {
        beta,
        gram_inverse: inverse,
        rank: p,
        factorization: Factorization::Cholesky,
    })
}

/// Minimum-norm solution from the eigenvalues above `cutoff`.
fn eigen_solve(gram: &SymMatrix, rhs: &[f64], cutoff: f64) -> Solution {
    let p = gram.order();
    let eig = SymmetricEigen::new(gram.to_dmatrix());
    let mut inverse = SymMatrix::zeros(p);
    let mut beta = vec![0.0; p];
    let mut rank = 0;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= cutoff {
            continue;
        }
        rank += 1;
        let v = eig.eigenvectors.column(i);
        let proj: f64 = v.iter().zip(rhs).map(|(a, b)| a * b).sum::<f64>() / lambda;
        for j in 0..p {
            beta[j] += v[j] * proj;
            let vj = v[j] / lambda;
            for k in j..p {
                inverse.add(j, k, vj * v[k]);
            }
        }
    }
    Solution {
        beta,
        gram_inverse: inverse,
        rank,
        factorization: Factorization::Eigen,
    }
}

/// Coefficients for the raw design: `(I - e_c μᵀ) Σ β`, where `c` is the
/// intercept column. Without centering this is just `Σβ`.
pub fn to_original(beta_transformed: &[f64], plan: &StandardizationPlan) -> Result<Vec<f64>> {
    check_len("coefficients against plan", plan.n_cols(), beta_transformed.len())?;
    let mut out: Vec<f64> = beta_transformed
        .iter()
        .zip(&plan.scale)
        .map(|(b, s)| b * s)
        .collect();
    let shift: f64 = plan.means.iter().zip(&out).map(|(m, b)| m * b).sum();
    match plan.intercept_col {
        Some(c) => out[c] -= shift,
        None if plan.center => return Err(Error::MissingIntercept),
        None => {}
    }
    Ok(out)
}

/// `M β` through a sparse matrix-vector product.
pub fn predict(m: &SparseDesign, beta_original: &[f64]) -> Result<Vec<f64>> {
    m.mul_vec(beta_original)
}

/// `M̃ β` computed as `M(Σβ) - (μᵀΣβ)·1`, valid with or without an intercept.
pub fn predict_transformed(
    m: &SparseDesign,
    beta_transformed: &[f64],
    plan: &StandardizationPlan,
) -> Result<Vec<f64>> {
    check_len("coefficients against plan", plan.n_cols(), beta_transformed.len())?;
    let scaled: Vec<f64> = beta_transformed
        .iter()
        .zip(&plan.scale)
        .map(|(b, s)| b * s)
        .collect();
    let shift: f64 = plan.means.iter().zip(&scaled).map(|(m, b)| m * b).sum();
    let mut out = m.mul_vec(&scaled)?;
    if shift != 0.0 {
        out.iter_mut().for_each(|v| *v -= shift);
    }
    Ok(out)
}

/// `k̂² = Σ w_i (y_i - ŷ_i)² / (n - p)`; pass `None` for unit weights.
pub fn residual_variance(y: &[f64], y_hat: &[f64], w: Option<&[f64]>, p: usize) -> Result<f64> {
    let n = y.len();
    check_len("fitted values against response", n, y_hat.len())?;
    if n <= p {
        return Err(Error::NoDegreesOfFreedom { n, p });
    }
    let rss: f64 = match w {
        Some(w) => {
            check_len("weights against response", n, w.len())?;
            y.iter()
                .zip(y_hat)
                .zip(w)
                .map(|((a, b), wi)| wi * (a - b) * (a - b))
                .sum()
        }
        None => y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum(),
    };
    Ok(rss / (n - p) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub center: bool,
    pub scale: bool,
    pub intercept_col: Option<usize>,
    pub covariance: CovarianceKind,
    pub residual_weighting: ResidualWeighting,
    pub method: SolveMethod,
    /// Gram worker count; `None` reads [`crate::sparse::THREADS_ENV`].
    pub workers: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            center: true,
            scale: false,
            intercept_col: None,
            covariance: CovarianceKind::Homoskedastic,
            residual_weighting: ResidualWeighting::Weighted,
            method: SolveMethod::Auto,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta_transformed: Vec<f64>,
    /// Absent when centering is enabled without an intercept column.
    pub beta_original: Option<Vec<f64>>,
    pub gram_inverse: SymMatrix,
    pub k_hat_sq: f64,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub dof: usize,
    pub rank: usize,
    pub factorization: Factorization,
    pub covariance_kind: CovarianceKind,
    pub covariance: Option<SymMatrix>,
    pub sum_w: f64,
    pub n_obs: usize,
    pub plan: StandardizationPlan,
}

pub(crate) fn validate_inputs(m: &SparseDesign, y: &[f64], w: &[f64]) -> Result<()> {
    check_len("response against matrix rows", m.n_rows(), y.len())?;
    check_len("weights against matrix rows", m.n_rows(), w.len())?;
    m.check_finite()?;
    check_finite("response", y)?;
    check_weights(w)?;
    if w.iter().sum::<f64>() <= 0.0 {
        return Err(Error::ZeroWeightSum);
    }
    Ok(())
}

/// Fits centered/scaled weighted least squares on a sparse design.
///
/// Runs standardization, the expanded normal equations, the solve,
/// back-transformation, prediction on the raw design, `k̂²` and the requested
/// covariance. Errors carry the stage that raised them.
pub fn fit(m: &SparseDesign, y: &[f64], w: &[f64], options: &FitOptions) -> Result<FitResult> {
    validate_inputs(m, y, w).map_err(|e| e.at(Stage::Validate))?;
    let workers = options.workers.unwrap_or_else(default_workers);

    let plan = compute_plan(m, w, options.center, options.scale, options.intercept_col)
        .map_err(|e| e.at(Stage::Moments))?;
    let eqs = build_normal_equations_with(m, y, w, &plan, workers)
        .map_err(|e| e.at(Stage::NormalEquations))?;
    let solution = solve_transformed_with(&eqs, options.method).map_err(|e| e.at(Stage::Solve))?;

    let beta_original = match to_original(&solution.beta, &plan) {
        Ok(b) => Some(b),
        Err(Error::MissingIntercept) => None,
        Err(e) => return Err(e.at(Stage::BackTransform)),
    };
    let fitted = match &beta_original {
        Some(b) => predict(m, b),
        None => predict_transformed(m, &solution.beta, &plan),
    }
    .map_err(|e| e.at(Stage::Predict))?;
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();

    let p = m.n_cols();
    let weights = match options.residual_weighting {
        ResidualWeighting::Weighted => Some(w),
        ResidualWeighting::Unweighted => None,
    };
    let k_hat_sq = residual_variance(y, &fitted, weights, p)
        .map_err(|e| e.at(Stage::ResidualVariance))?;

    let covariance = match options.covariance {
        CovarianceKind::None => None,
        CovarianceKind::Homoskedastic => Some(cov_homoskedastic(&solution.gram_inverse, k_hat_sq)),
        CovarianceKind::Hc => Some(
            cov_hc_with(m, w, &residuals, &plan, &solution.gram_inverse, workers)
                .map_err(|e| e.at(Stage::Covariance))?,
        ),
    };

    Ok(FitResult {
        beta_transformed: solution.beta,
        beta_original,
        gram_inverse: solution.gram_inverse,
        k_hat_sq,
        fitted,
        residuals,
        dof: m.n_rows() - p,
        rank: solution.rank,
        factorization: solution.factorization,
        covariance_kind: options.covariance,
        covariance,
        sum_w: eqs.sum_w,
        n_obs: eqs.n_obs,
        plan,
    })
}
