//! Naive reference solver: densify `M̃ = (M - 1μᵀ)Σ`, form the normal
//! equations with plain loops, and solve them through an SVD pseudoinverse.
//!
//! Nothing here shares numerics with the sparse path (moments are two-pass,
//! the Gram is a row-wise triple loop, the solve is a one-sided Jacobi SVD),
//! so it serves both as the correctness oracle and the benchmark baseline.
//! Single-threaded.

use crate::covariance::CovarianceKind;
use crate::error::{Error, Result};
use crate::moments::StandardizationPlan;
use crate::solver::{validate_inputs, Factorization, FitOptions, FitResult, ResidualWeighting};
use crate::sparse::{SparseDesign, SymMatrix};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDesign {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl DenseDesign {
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Two-pass weighted moments over a densified copy of each column.
pub fn dense_plan(
    m: &SparseDesign,
    w: &[f64],
    center: bool,
    scale: bool,
    intercept_col: Option<usize>,
) -> Result<StandardizationPlan> {
    let n = m.n_rows();
    let sum_w: f64 = w.iter().sum();
    if sum_w <= 0.0 {
        return Err(Error::ZeroWeightSum);
    }
    let mut means = Vec::with_capacity(m.n_cols());
    let mut stddevs = Vec::with_capacity(m.n_cols());
    let mut column = vec![0.0; n];
    for j in 0..m.n_cols() {
        column.iter_mut().for_each(|x| *x = 0.0);
        let (rows, vals) = m.column(j);
        for (&r, &x) in rows.iter().zip(vals) {
            column[r as usize] = x;
        }
        let mean = column.iter().zip(w).map(|(x, wi)| wi * x).sum::<f64>() / sum_w;
        let var = column
            .iter()
            .zip(w)
            .map(|(x, wi)| wi * (x - mean) * (x - mean))
            .sum::<f64>()
            / sum_w;
        means.push(mean);
        stddevs.push(var.sqrt());
    }
    StandardizationPlan::from_moments(means, stddevs, center, scale, intercept_col)
}

/// Allocates and fills the dense `n x p` centered, scaled design.
pub fn materialize_centered(m: &SparseDesign, plan: &StandardizationPlan) -> Result<DenseDesign> {
    let (n, p) = (m.n_rows(), m.n_cols());
    let len = n.checked_mul(p).ok_or(Error::Allocation { bytes: usize::MAX })?;
    let bytes = len.saturating_mul(std::mem::size_of::<f64>());
    let mut data: Vec<f64> = Vec::new();
    data.try_reserve_exact(len)
        .map_err(|_| Error::Allocation { bytes })?;
    data.resize(len, 0.0);
    for (i, j, v) in m.triplets() {
        data[i * p + j] = v;
    }
    for row in data.chunks_exact_mut(p) {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (*x - plan.means[j]) * plan.scale[j];
        }
    }
    Ok(DenseDesign {
        n_rows: n,
        n_cols: p,
        data,
    })
}

/// `Σ_i d_i x_i x_iᵀ` over the rows of a dense matrix, as a full `p x p` array.
fn dense_weighted_gram(x: &DenseDesign, d: &[f64]) -> Vec<f64> {
    let p = x.n_cols;
    let mut g = vec![0.0; p * p];
    for (i, &di) in d.iter().enumerate() {
        let row = x.row(i);
        for j in 0..p {
            let a = di * row[j];
            for k in j..p {
                g[j * p + k] += a * row[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            g[j * p + k] = g[k * p + j];
        }
    }
    g
}

fn matmul(a: &[f64], b: &[f64], p: usize) -> Vec<f64> {
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        for k in 0..p {
            for j in 0..p {
                out[i * p + j] += a[i * p + k] * b[k * p + j];
            }
        }
    }
    out
}

/// Pseudoinverse of a square row-major matrix by one-sided Jacobi (Hestenes)
/// SVD, dropping singular values `<= cutoff`. Returns the rank and the
/// pseudoinverse, row-major.
pub fn jacobi_pinv(a: &[f64], p: usize, cutoff: f64) -> (usize, Vec<f64>) {
    // cols[k] is column k of the working matrix, v[k] column k of V.
    let mut cols: Vec<Vec<f64>> = (0..p).map(|k| (0..p).map(|i| a[i * p + k]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..p)
        .map(|k| (0..p).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
        .collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let rotate = |x: &mut Vec<Vec<f64>>, i: usize, j: usize, c: f64, s: f64| {
        for r in 0..p {
            let (xi, xj) = (x[i][r], x[j][r]);
            x[i][r] = c * xi - s * xj;
            x[j][r] = s * xi + c * xj;
        }
    };
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut pinv = vec![0.0; p * p];
    let mut rank = 0;
    for k in 0..p {
        let sigma = dot(&cols[k], &cols[k]).sqrt();
        if sigma <= cutoff {
            continue;
        }
        rank += 1;
        // v_k u_kᵀ / σ with u_k = cols[k] / σ
        for r in 0..p {
            let a = v[k][r] / (sigma * sigma);
            for c in 0..p {
                pinv[r * p + c] += a * cols[k][c];
            }
        }
    }
    (rank, pinv)
}

/// The naive fit: same contract as [`crate::solver::fit`].
pub fn naive_fit(m: &SparseDesign, y: &[f64], w: &[f64], options: &FitOptions) -> Result<FitResult> {
    validate_inputs(m, y, w)?;
    let (n, p) = (m.n_rows(), m.n_cols());
    let plan = dense_plan(m, w, options.center, options.scale, options.intercept_col)?;
    let x = materialize_centered(m, &plan)?;

    let gram = dense_weighted_gram(&x, w);
    let mut rhs = vec![0.0; p];
    for i in 0..n {
        let row = x.row(i);
        for j in 0..p {
            rhs[j] += w[i] * row[j] * y[i];
        }
    }
    let sum_w: f64 = w.iter().sum();

    let max_diag = (0..p).map(|j| gram[j * p + j]).fold(0.0_f64, f64::max);
    let cutoff = p as f64 * f64::EPSILON * max_diag;
    let (rank, pinv_rows) = jacobi_pinv(&gram, p, cutoff);
    let beta_t: Vec<f64> = (0..p)
        .map(|j| (0..p).map(|k| pinv_rows[j * p + k] * rhs[k]).sum())
        .collect();

    // (I - e_c μᵀ) Σ as an explicit matrix.
    let beta_original = if options.center && plan.intercept_col.is_none() {
        None
    } else {
        let mut t = vec![0.0; p * p];
        for j in 0..p {
            t[j * p + j] = plan.scale[j];
        }
        if let Some(c) = plan.intercept_col {
            for k in 0..p {
                t[c * p + k] -= plan.means[k] * plan.scale[k];
            }
        }
        Some(
            (0..p)
                .map(|j| (0..p).map(|k| t[j * p + k] * beta_t[k]).sum())
                .collect::<Vec<f64>>(),
        )
    };

    let fitted = x.mul_vec(&beta_t);
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    if n <= p {
        return Err(Error::NoDegreesOfFreedom { n, p });
    }
    let rss: f64 = match options.residual_weighting {
        ResidualWeighting::Weighted => residuals.iter().zip(w).map(|(e, wi)| wi * e * e).sum(),
        ResidualWeighting::Unweighted => residuals.iter().map(|e| e * e).sum(),
    };
    let k_hat_sq = rss / (n - p) as f64;

    let covariance = match options.covariance {
        CovarianceKind::None => None,
        CovarianceKind::Homoskedastic => {
            let scaled: Vec<f64> = pinv_rows.iter().map(|v| v * k_hat_sq).collect();
            Some(SymMatrix::from_upper_of(p, &scaled))
        }
        CovarianceKind::Hc => {
            let d: Vec<f64> = w.iter().zip(&residuals).map(|(wi, e)| wi * e * e).collect();
            let inner = dense_weighted_gram(&x, &d);
            let sandwich = matmul(&matmul(&pinv_rows, &inner, p), &pinv_rows, p);
            Some(SymMatrix::from_upper_of(p, &sandwich))
        }
    };

    Ok(FitResult {
        beta_transformed: beta_t,
        beta_original,
        gram_inverse: SymMatrix::from_upper_of(p, &pinv_rows),
        k_hat_sq,
        fitted,
        residuals,
        dof: n - p,
        rank,
        factorization: Factorization::Svd,
        covariance_kind: options.covariance,
        covariance,
        sum_w,
        n_obs: n,
        plan,
    })
}
