//! Weighted column moments and the standardization plan applied implicitly
//! to the design matrix.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, check_weights, Error, Result};
use crate::sparse::SparseDesign;

/// Affine column transform `x -> (x - means[j]) * scale[j]`.
///
/// An intercept column, when designated, is exempt: its mean is stored as 0
/// and its scale as 1 so the transform leaves it untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationPlan {
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
    pub scale: Vec<f64>,
    pub center: bool,
    pub scale_enabled: bool,
    pub intercept_col: Option<usize>,
}

impl StandardizationPlan {
    /// The plan that leaves every column unchanged.
    pub fn identity(p: usize) -> Self {
        StandardizationPlan {
            means: vec![0.0; p],
            stddevs: vec![1.0; p],
            scale: vec![1.0; p],
            center: false,
            scale_enabled: false,
            intercept_col: None,
        }
    }

    pub fn n_cols(&self) -> usize {
        self.means.len()
    }

    /// `means[j] * scale[j]`, the vector `Σμ` used by the Gram corrections.
    pub fn scaled_means(&self) -> Vec<f64> {
        self.means.iter().zip(&self.scale).map(|(m, s)| m * s).collect()
    }

    pub fn is_exempt(&self, j: usize) -> bool {
        self.intercept_col == Some(j)
    }

    /// Builds a plan from precomputed moments, applying the flag and exemption
    /// rules. `stddevs` must already be clamped at zero.
    pub fn from_moments(
        means: Vec<f64>,
        stddevs: Vec<f64>,
        center: bool,
        scale: bool,
        intercept_col: Option<usize>,
    ) -> Result<Self> {
        let p = means.len();
        check_len("standard deviations against means", p, stddevs.len())?;
        if let Some(col) = intercept_col {
            if col >= p {
                return Err(Error::InterceptOutOfRange { col, n_cols: p });
            }
        }
        let mut plan = StandardizationPlan {
            means,
            stddevs,
            scale: vec![1.0; p],
            center,
            scale_enabled: scale,
            intercept_col,
        };
        for j in 0..p {
            if plan.is_exempt(j) {
                plan.means[j] = 0.0;
                plan.stddevs[j] = 1.0;
                continue;
            }
            if scale {
                if plan.stddevs[j] <= 0.0 {
                    return Err(Error::ZeroVariance { col: j });
                }
                plan.scale[j] = 1.0 / plan.stddevs[j];
            }
            if !center {
                plan.means[j] = 0.0;
            }
        }
        Ok(plan)
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.carry
    }
}

fn weight_total(w: &[f64]) -> f64 {
    let mut acc = CompensatedSum::default();
    for &v in w {
        acc.add(v);
    }
    acc.total()
}

const VARIANCE_NOISE: f64 = 8.0;

/// Weighted column means and population standard deviations, one pass over
/// the stored entries: `σ² = E_w[x²] - E_w[x]²`, clamped at 0.
pub fn weighted_moments(m: &SparseDesign, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    check_len("weights against matrix rows", m.n_rows(), w.len())?;
    check_weights(w)?;
    let sum_w = weight_total(w);
    if sum_w <= 0.0 {
        return Err(Error::ZeroWeightSum);
    }
    let p = m.n_cols();
    let mut means = Vec::with_capacity(p);
    let mut stddevs = Vec::with_capacity(p);
    for j in 0..p {
        let (rows, vals) = m.column(j);
        let mut first = CompensatedSum::default();
        let mut second = CompensatedSum::default();
        for (&r, &x) in rows.iter().zip(vals) {
            if x == 0.0 {
                continue;
            }
            let wx = w[r as usize] * x;
            first.add(wx);
            second.add(wx * x);
        }
        let mean = first.total() / sum_w;
        let second_moment = second.total() / sum_w;
        let mut var = second_moment - mean * mean;
        // Below this the difference is rounding noise of the two sums; a
        // constant column must come out with σ = 0 exactly.
        if var <= VARIANCE_NOISE * f64::EPSILON * second_moment {
            var = 0.0;
        }
        means.push(mean);
        stddevs.push(var.sqrt());
    }
    Ok((means, stddevs, sum_w))
}

/// Computes the standardization plan for `m` under weights `w`.
pub fn compute_plan(
    m: &SparseDesign,
    w: &[f64],
    center: bool,
    scale: bool,
    intercept_col: Option<usize>,
) -> Result<StandardizationPlan> {
    let (means, stddevs, _) = weighted_moments(m, w)?;
    StandardizationPlan::from_moments(means, stddevs, center, scale, intercept_col)
}

/// `Σw`, `Σ w_i y_i` and the elementwise product `w ∘ y`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightAggregates {
    pub sum_w: f64,
    pub sum_wy: f64,
    pub wy: Vec<f64>,
}

pub fn weight_aggregates(w: &[f64], y: &[f64]) -> Result<WeightAggregates> {
    check_len("weights against response", y.len(), w.len())?;
    let wy: Vec<f64> = w.iter().zip(y).map(|(a, b)| a * b).collect();
    Ok(WeightAggregates {
        sum_w: w.iter().sum(),
        sum_wy: wy.iter().sum(),
        wy,
    })
}
