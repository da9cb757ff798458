mod common;

use centered_ols::covariance::{cov_homoskedastic, CovarianceKind};
use centered_ols::datagen::{simulate, SimulationSpec};
use centered_ols::gram::{centered_gram, cross_correction, outer_correction, scaled_colsums};
use centered_ols::moments::weighted_moments;
use centered_ols::oracle::{dense_plan, materialize_centered, naive_fit};
use centered_ols::solver::{predict, SolveMethod};
use centered_ols::sparse::{transpose_apply, weighted_column_sums, weighted_gram_upper, weighted_gram_upper_with};
use centered_ols::{
    build_normal_equations, compute_plan, fit, FitOptions, SparseDesign, StandardizationPlan, SymMatrix,
};
use nalgebra::SymmetricEigen;
use proptest::prelude::*;

use common::{dense_of, random_instance, random_triplets, rel_err, scalar_rel_err, Draws, Instance};

fn min_eigenvalue(g: &SymMatrix) -> f64 {
    SymmetricEigen::new(g.to_dmatrix()).eigenvalues.min()
}

fn small_matrix(seed: u64) -> (SparseDesign, Vec<f64>, Vec<(usize, usize, f64)>) {
    let mut d = Draws::new(seed);
    let n = d.range(1, 200);
    let p = d.range(1, 20);
    let density = 0.5 * d.uniform();
    let triplets = random_triplets(&mut d, n, p, density);
    let w: Vec<f64> = (0..n).map(|_| 2.0 * d.uniform()).collect();
    (SparseDesign::from_triplets(n, p, &triplets).unwrap(), w, triplets)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kernels_match_dense_loops(seed in any::<u64>()) {
        let (m, w, triplets) = small_matrix(seed);
        let (n, p) = (m.n_rows(), m.n_cols());
        let a = dense_of(n, p, &triplets);

        let sums: Vec<f64> = (0..p).map(|j| (0..n).map(|i| w[i] * a[i * p + j]).sum()).collect();
        prop_assert!(rel_err(&weighted_column_sums(&m, &w).unwrap(), &sums) <= 1e-12);

        let applied: Vec<f64> = (0..p).map(|j| (0..n).map(|i| a[i * p + j] * w[i]).sum()).collect();
        prop_assert!(rel_err(&transpose_apply(&m, &w).unwrap(), &applied) <= 1e-12);

        let mut gram = vec![0.0; p * p];
        for j in 0..p {
            for k in 0..p {
                gram[j * p + k] = (0..n).map(|i| w[i] * a[i * p + j] * a[i * p + k]).sum();
            }
        }
        let g = weighted_gram_upper(&m, &w).unwrap();
        prop_assert!(rel_err(&g.to_full(), &gram) <= 1e-12);

        let max_entry = g.max_abs();
        prop_assert!(min_eigenvalue(&g) >= -1e-9 * max_entry);

        let unweighted: Vec<f64> = (0..p * p)
            .map(|jk| (0..n).map(|i| a[i * p + jk / p] * a[i * p + jk % p]).sum())
            .collect();
        let g1 = weighted_gram_upper(&m, &vec![1.0; n]).unwrap();
        prop_assert!(rel_err(&g1.to_full(), &unweighted) <= 1e-12);
    }

    #[test]
    fn explicit_zeros_change_nothing(seed in any::<u64>()) {
        let (m, w, mut triplets) = small_matrix(seed);
        let (n, p) = (m.n_rows(), m.n_cols());
        let mut d = Draws::new(seed ^ 0xABCD);
        let occupied: std::collections::HashSet<(usize, usize)> =
            triplets.iter().map(|&(i, j, _)| (i, j)).collect();
        for _ in 0..10 {
            let (i, j) = (d.range(0, n - 1), d.range(0, p - 1));
            if !occupied.contains(&(i, j)) {
                triplets.push((i, j, 0.0));
            }
        }
        let z = SparseDesign::from_triplets(n, p, &triplets).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(
            bits(&weighted_column_sums(&m, &w).unwrap()),
            bits(&weighted_column_sums(&z, &w).unwrap())
        );
        prop_assert_eq!(bits(&transpose_apply(&m, &w).unwrap()), bits(&transpose_apply(&z, &w).unwrap()));
        prop_assert_eq!(
            bits(weighted_gram_upper(&m, &w).unwrap().packed()),
            bits(weighted_gram_upper(&z, &w).unwrap().packed())
        );
    }

    #[test]
    fn gram_is_identical_for_any_worker_count(seed in any::<u64>(), workers in 2usize..9) {
        let (m, w, _) = small_matrix(seed);
        prop_assert_eq!(
            weighted_gram_upper_with(&m, &w, 1).unwrap(),
            weighted_gram_upper_with(&m, &w, workers).unwrap()
        );
    }

    #[test]
    fn one_pass_moments_match_two_pass(seed in any::<u64>()) {
        let (m, w, triplets) = small_matrix(seed);
        prop_assume!(w.iter().sum::<f64>() > 0.0);
        let (n, p) = (m.n_rows(), m.n_cols());
        let (means, stddevs, _) = weighted_moments(&m, &w).unwrap();
        let a = dense_of(n, p, &triplets);
        let sum_w: f64 = w.iter().sum();
        for j in 0..p {
            let mu: f64 = (0..n).map(|i| w[i] * a[i * p + j]).sum::<f64>() / sum_w;
            let var: f64 = (0..n).map(|i| w[i] * (a[i * p + j] - mu).powi(2)).sum::<f64>() / sum_w;
            let scale = (0..n).map(|i| a[i * p + j].abs()).fold(0.0, f64::max);
            prop_assert!((means[j] - mu).abs() <= 1e-10 * mu.abs().max(1e-3 * scale));
            prop_assert!((stddevs[j] - var.sqrt()).abs() <= 1e-10 * var.sqrt().max(1e-3 * scale));
        }
    }

    #[test]
    fn unit_weights_give_plain_moments(seed in any::<u64>()) {
        let (m, _, triplets) = small_matrix(seed);
        let (n, p) = (m.n_rows(), m.n_cols());
        let a = dense_of(n, p, &triplets);
        let (means, stddevs, sum_w) = weighted_moments(&m, &vec![1.0; n]).unwrap();
        prop_assert_eq!(sum_w, n as f64);
        for j in 0..p {
            let col: Vec<f64> = (0..n).map(|i| a[i * p + j]).collect();
            let mu = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n as f64;
            let scale = col.iter().fold(0.0_f64, |s, x| s.max(x.abs()));
            prop_assert!((means[j] - mu).abs() <= 1e-12 * scale.max(1.0));
            prop_assert!((stddevs[j] - var.sqrt()).abs() <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn plan_is_invariant_to_weight_scale(seed in any::<u64>(), c in 0.01f64..100.0) {
        let (m, w, _) = small_matrix(seed);
        prop_assume!(w.iter().sum::<f64>() > 0.0);
        let scaled: Vec<f64> = w.iter().map(|x| c * x).collect();
        let (mu1, sd1, _) = weighted_moments(&m, &w).unwrap();
        let (mu2, sd2, _) = weighted_moments(&m, &scaled).unwrap();
        prop_assert!(rel_err(&mu2, &mu1) <= 1e-12);
        prop_assert!(rel_err(&sd2, &sd1) <= 1e-12);
    }

    #[test]
    fn centered_columns_have_zero_weighted_sum(seed in any::<u64>(), variant in 0usize..8) {
        let inst = random_instance(seed, variant);
        let plan = compute_plan(&inst.m, &inst.w, true, false, inst.options.intercept_col).unwrap();
        let sums = weighted_column_sums(&inst.m, &inst.w).unwrap();
        let sum_w: f64 = inst.w.iter().sum();
        let max_m = inst.m.values().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        for j in (0..inst.m.n_cols()).filter(|&j| !plan.is_exempt(j)) {
            prop_assert!((sums[j] - sum_w * plan.means[j]).abs() <= 1e-9 * sum_w * max_m);
        }
    }
}

/// Gram and right-hand side of the materialized `M̃ = (M - 1μᵀ)Σ`.
fn materialized_equations(inst: &Instance, plan: &StandardizationPlan) -> (Vec<f64>, Vec<f64>) {
    let x = materialize_centered(&inst.m, plan).unwrap();
    let (n, p) = (x.n_rows, x.n_cols);
    let mut g = vec![0.0; p * p];
    let mut b = vec![0.0; p];
    for i in 0..n {
        for j in 0..p {
            b[j] += inst.w[i] * x.get(i, j) * inst.y[i];
            for k in 0..p {
                g[j * p + k] += inst.w[i] * x.get(i, j) * x.get(i, k);
            }
        }
    }
    (g, b)
}

#[test]
fn normal_equations_match_materialized_oracle() {
    for variant in 0..8 {
        for k in 0..38 {
            let inst = random_instance(50_000 + 100 * variant as u64 + k, variant);
            let o = &inst.options;
            let plan = compute_plan(&inst.m, &inst.w, o.center, o.scale, o.intercept_col).unwrap();
            let eqs = build_normal_equations(&inst.m, &inst.y, &inst.w, &plan).unwrap();
            let (g, b) = materialized_equations(&inst, &plan);
            let p = inst.m.n_cols();
            let yy: f64 = inst.w.iter().zip(&inst.y).map(|(w, y)| w * y * y).sum();
            for j in 0..p {
                for k in 0..p {
                    // Cauchy-Schwarz bound as the entry's natural scale
                    let scale = (g[j * p + j] * g[k * p + k]).sqrt();
                    let got = eqs.gram.get(j.min(k), j.max(k));
                    assert!(
                        (got - g[j * p + k]).abs() <= 1e-9 * scale,
                        "variant {variant} instance {k}: G[{j},{k}] {got} vs {}",
                        g[j * p + k]
                    );
                }
                let scale = (g[j * p + j] * yy).sqrt();
                assert!((eqs.rhs[j] - b[j]).abs() <= 1e-9 * scale, "rhs[{j}]");
            }
        }
    }
}

#[test]
fn gram_pieces_commute() {
    for variant in [1, 3, 5, 7] {
        for k in 0..20 {
            let inst = random_instance(60_000 + 100 * variant as u64 + k, variant);
            let o = &inst.options;
            let plan = compute_plan(&inst.m, &inst.w, o.center, o.scale, o.intercept_col).unwrap();
            let uncentered = StandardizationPlan {
                means: vec![0.0; plan.n_cols()],
                ..plan.clone()
            };
            let sparse = centered_gram(&inst.m, &inst.w, &uncentered, 1).unwrap();
            let u = scaled_colsums(&inst.m, &inst.w, &plan).unwrap();
            let v = plan.scaled_means();
            let sum_w: f64 = inst.w.iter().sum();
            let cross = cross_correction(&u, &v).unwrap();
            let outer = outer_correction(&v, sum_w).unwrap();
            let reference = centered_gram(&inst.m, &inst.w, &plan, 1).unwrap();
            let orders = [
                sparse.plus(&cross).plus(&outer),
                sparse.plus(&outer).plus(&cross),
                outer.plus(&cross).plus(&sparse),
            ];
            for g in &orders {
                assert!(rel_err(g.packed(), reference.packed()) <= 1e-12);
            }
        }
    }
}

fn fit_pair(inst: &Instance, kind: CovarianceKind) -> (centered_ols::FitResult, centered_ols::FitResult) {
    let options = FitOptions {
        covariance: kind,
        ..inst.options.clone()
    };
    (
        fit(&inst.m, &inst.y, &inst.w, &options).unwrap(),
        naive_fit(&inst.m, &inst.y, &inst.w, &options).unwrap(),
    )
}

#[test]
fn fits_match_dense_oracle_across_grid() {
    for variant in 0..8 {
        for k in 0..10 {
            let inst = random_instance(70_000 + 100 * variant as u64 + k, variant);
            for kind in [CovarianceKind::Homoskedastic, CovarianceKind::Hc] {
                let (a, b) = fit_pair(&inst, kind);
                assert!(rel_err(&a.beta_transformed, &b.beta_transformed) <= 1e-9);
                assert!(scalar_rel_err(a.k_hat_sq, b.k_hat_sq) <= 1e-9);
                let (ca, cb) = (a.covariance.unwrap(), b.covariance.unwrap());
                assert!(rel_err(&ca.to_full(), &cb.to_full()) <= 1e-9, "{kind}");
                assert!(min_eigenvalue(&ca) >= -1e-9 * ca.diagonal().iter().fold(0.0, |m: f64, v| m.max(*v)));
            }
        }
    }
}

#[test]
fn raw_predictions_equal_centered_predictions() {
    for variant in [4, 5, 6, 7] {
        for k in 0..25 {
            let inst = random_instance(80_000 + 100 * variant as u64 + k, variant);
            let (a, b) = fit_pair(&inst, CovarianceKind::None);
            let y_raw = predict(&inst.m, a.beta_original.as_ref().unwrap()).unwrap();
            let max_y = inst.y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for (r, t) in y_raw.iter().zip(&b.fitted) {
                assert!((r - t).abs() <= 1e-9 * max_y);
            }
        }
    }
}

#[test]
fn forced_pseudoinverse_agrees_with_cholesky() {
    for variant in 0..8 {
        for k in 0..10 {
            let inst = random_instance(90_000 + 100 * variant as u64 + k, variant);
            let auto = fit(&inst.m, &inst.y, &inst.w, &inst.options).unwrap();
            let forced = FitOptions {
                method: SolveMethod::Pseudoinverse,
                ..inst.options.clone()
            };
            let pinv = fit(&inst.m, &inst.y, &inst.w, &forced).unwrap();
            assert!(rel_err(&pinv.beta_transformed, &auto.beta_transformed) <= 1e-8);
        }
    }
}

#[test]
fn centering_does_not_change_fitted_values() {
    for k in 0..40 {
        let inst = random_instance(100_000 + k, 4);
        let mut options = inst.options.clone();
        options.center = true;
        let centered = fit(&inst.m, &inst.y, &inst.w, &options).unwrap();
        options.center = false;
        let raw = fit(&inst.m, &inst.y, &inst.w, &options).unwrap();
        if centered.rank == inst.m.n_cols() {
            assert!(rel_err(&centered.fitted, &raw.fitted) <= 1e-8);
        }
    }
}

#[test]
fn response_in_span_has_zero_residual_variance() {
    for k in 0..30 {
        let mut inst = random_instance(110_000 + k, 7);
        let beta: Vec<f64> = (0..inst.m.n_cols()).map(|j| 1.0 - 0.1 * j as f64).collect();
        inst.y = inst.m.mul_vec(&beta).unwrap();
        let r = fit(&inst.m, &inst.y, &inst.w, &inst.options).unwrap();
        let max_y = inst.y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(r.k_hat_sq <= 1e-16 * max_y * max_y, "{}", r.k_hat_sq);
    }
}

#[test]
fn homoskedastic_covariance_is_linear_in_k() {
    let inst = random_instance(7, 7);
    let r = fit(&inst.m, &inst.y, &inst.w, &inst.options).unwrap();
    let once = cov_homoskedastic(&r.gram_inverse, r.k_hat_sq);
    let twice = cov_homoskedastic(&r.gram_inverse, 2.0 * r.k_hat_sq);
    for (a, b) in once.packed().iter().zip(twice.packed()) {
        assert_eq!(2.0 * a, *b);
    }
}

#[test]
fn dense_oracle_columns_are_centered() {
    for variant in [1, 3, 5, 7] {
        for k in 0..10 {
            let inst = random_instance(120_000 + 100 * variant as u64 + k, variant);
            let o = &inst.options;
            let plan = dense_plan(&inst.m, &inst.w, true, o.scale, o.intercept_col).unwrap();
            let x = materialize_centered(&inst.m, &plan).unwrap();
            let sum_w: f64 = inst.w.iter().sum();
            for j in (0..x.n_cols).filter(|&j| !plan.is_exempt(j)) {
                let mean: f64 = (0..x.n_rows).map(|i| inst.w[i] * x.get(i, j)).sum::<f64>() / sum_w;
                assert!(mean.abs() <= 1e-10, "column {j}: {mean}");
            }
        }
    }
}

#[test]
fn simulated_density_is_binomial() {
    let (n, p, density) = (1000, 100, 0.1);
    let sd = (density * (1.0 - density) / (n * p) as f64).sqrt();
    for seed in 0..50 {
        let spec = SimulationSpec {
            n,
            p,
            density,
            seed,
            with_intercept: false,
            noise_sd: 1.0,
        };
        let realized = simulate(&spec).unwrap().design.density();
        assert!((realized - density).abs() <= 3.0 * sd, "seed {seed}: {realized}");
    }
}

#[test]
fn noiseless_simulation_is_recovered() {
    for seed in 0..10 {
        let spec = SimulationSpec {
            n: 400,
            p: 12,
            density: 0.3,
            seed,
            with_intercept: true,
            noise_sd: 0.0,
        };
        let sim = simulate(&spec).unwrap();
        let options = FitOptions {
            center: true,
            scale: true,
            intercept_col: Some(0),
            ..FitOptions::default()
        };
        let r = fit(&sim.design, &sim.y, &sim.w, &options).unwrap();
        if r.rank == spec.p {
            assert!(rel_err(r.beta_original.as_ref().unwrap(), &sim.beta_true) <= 1e-8);
        }
    }
}
