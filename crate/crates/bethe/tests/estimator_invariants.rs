//! Statistical invariants of the population estimators at desk scale.

use bethe::disorder::DisorderModel;
use bethe::greens::{free_gamma, ComplexEnergy};
use bethe::population::{
    estimate_free_energy, estimate_lyapunov, fekete_consistency, legendre_dual, legendre_rate,
    pool_equilibrate,
};
use bethe::seed::RealizationSeed;

/// Supermultiplicativity of the restricted-moment sequence with an
/// empirically fitted constant, and the constant's collapse toward one as
/// s → 0.
#[test]
fn fekete_consistency_cauchy() {
    let model = DisorderModel::cauchy(0.0, 1.0, 0.3).unwrap();
    let seed = RealizationSeed::new(31_000);
    let pool = pool_equilibrate(&model, 2, ComplexEnergy::new(0.0, 1e-3), 10_000, 60, &seed);
    let report = fekete_consistency(&pool, &model, 0.5, 2500, 24, 47, &seed.child(1));
    assert!(report.all_ok, "violating pairs: {:?}", report.pairs.iter().filter(|p| !p.ok).take(3).collect::<Vec<_>>());
    assert!(report.log_c_hat.is_finite() && report.log_c_hat >= 0.0);

    let small = fekete_consistency(&pool, &model, 0.05, 2500, 24, 47, &seed.child(2));
    assert!(
        small.log_c_hat <= report.log_c_hat.max(0.2),
        "C(0.05) = e^{} should collapse toward 1",
        small.log_c_hat
    );
}

/// The pool fixed point at λ = 0 equals the free solution for K ∈ {2,3}
/// across a ζ grid.
#[test]
fn free_fixed_point_grid() {
    let model = DisorderModel::uniform_symmetric(0.0).unwrap();
    let seed = RealizationSeed::new(32_000);
    for k in [2u32, 3] {
        for (i, &(e, eta)) in [(0.0, 1.0), (1.0, 0.1), (-2.0, 0.01), (0.5, 1e-3), (2.5, 0.3)]
            .iter()
            .enumerate()
        {
            let zeta = ComplexEnergy::new(e, eta);
            let pool = pool_equilibrate(&model, k, zeta, 512, 60, &seed.child(i as u64));
            let target = free_gamma(k, zeta);
            for g in &pool.values {
                assert!((g - target).norm() < 1e-8, "K={k} zeta=({e},{eta})");
            }
        }
    }
}

/// Legendre duality round trip: −inf_γ [I(γ) + sγ] recovers φ(s) within the
/// interpolation error of the γ grid.
#[test]
fn legendre_duality_roundtrip() {
    let model = DisorderModel::cauchy(0.0, 1.0, 0.3).unwrap();
    let seed = RealizationSeed::new(33_000);
    let pool = pool_equilibrate(&model, 2, ComplexEnergy::new(0.0, 1e-3), 10_000, 60, &seed);
    let s_grid = [-0.5, -0.25, -0.1, 0.0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95];
    let curve = estimate_free_energy(&pool, &model, &s_grid, 40, 1500, &seed.child(1));
    let rf = legendre_rate(&curve);
    let step = rf.gamma_grid.windows(2).map(|w| w[1] - w[0]).next().unwrap_or(0.0);
    let max_slope = curve.s_grid.iter().map(|s| s.abs()).fold(0.0f64, f64::max);
    for (i, &s) in curve.s_grid.iter().enumerate() {
        let dual = legendre_dual(&rf, s);
        let tol = 2.0 * step * max_slope + 1e-9;
        assert!(
            (dual - curve.phi[i]).abs() <= tol,
            "s = {s}: dual {dual} vs phi {} (tol {tol})",
            curve.phi[i]
        );
    }
}

/// Eq.-style sandwich −sL̂ ≤ φ̂(s) ≤ −s·log√K within combined errors.
#[test]
fn sandwich_within_errors() {
    let model = DisorderModel::cauchy(0.0, 1.0, 0.3).unwrap();
    let seed = RealizationSeed::new(34_000);
    let pool = pool_equilibrate(&model, 2, ComplexEnergy::new(0.0, 1e-3), 20_000, 80, &seed);
    let (l, lse) = estimate_lyapunov(&pool);
    let s_grid = [-0.25, 0.0, 0.25, 0.5, 0.75, 0.85, 0.95];
    let curve = estimate_free_energy(&pool, &model, &s_grid, 48, 2000, &seed.child(1));
    let log_sqrt_2 = 0.5 * 2f64.ln();
    for (i, &s) in curve.s_grid.iter().enumerate() {
        if s <= 0.0 {
            continue;
        }
        let sigma = curve.stderr[i] + s * lse;
        assert!(curve.phi[i] >= -s * l - 3.0 * sigma, "lower bound at s = {s}");
        assert!(curve.phi[i] <= -s * log_sqrt_2 + 3.0 * sigma, "upper bound at s = {s}");
    }
}

/// Cauchy consistency |L̂_λ(E) − (−log|Γ₀(E+iλ)|)| ≤ 3σ on a 5×3 grid.
#[test]
fn cauchy_consistency_grid() {
    use bethe::population::lyapunov_boundary;
    for (ie, &e) in [0.0, 0.5, 1.0, 1.5, 2.0].iter().enumerate() {
        for (il, &lambda) in [0.1, 0.2, 0.3].iter().enumerate() {
            let model = DisorderModel::cauchy(0.0, 1.0, lambda).unwrap();
            let seed = RealizationSeed::with_path(35_000, &[ie as u64, il as u64]);
            let lb = lyapunov_boundary(&model, 2, e, &[1e-3, 1e-4], 20_000, 80, &seed);
            let oracle = -free_gamma(2, ComplexEnergy::new(e, lambda)).norm().ln();
            assert!(
                (lb.l - oracle).abs() <= 3.0 * lb.stderr.max(1e-3),
                "(E={e}, λ={lambda}): {} vs {oracle} (σ {})",
                lb.l,
                lb.stderr
            );
        }
    }
}

/// Interval averages M̂_λ(I) decrease toward log√K as λ ↓ 0, against the
/// closed-form quadrature oracle for Cauchy disorder.
#[test]
fn interval_average_decreases_with_lambda() {
    use bethe::phase::{lyapunov_interval_average, Budgets};
    use bethe::quad::adaptive_simpson;
    let model = DisorderModel::cauchy(0.0, 1.0, 0.2).unwrap();
    let budgets = Budgets {
        pool_size: 8000,
        sweeps: 60,
        etas: vec![1e-3],
        ..Budgets::default()
    };
    let lambdas = [0.2, 0.1, 0.05];
    let rows = lyapunov_interval_average(
        &model,
        2,
        (-1.0, 1.0),
        9,
        &lambdas,
        &budgets,
        &RealizationSeed::new(36_000),
    );
    let log_sqrt_2 = 0.5 * 2.0f64.ln();
    let mut last = f64::INFINITY;
    for (row, &lambda) in rows.iter().zip(&lambdas) {
        // closed-form oracle: trapezoid of −log|Γ₀(E+iλ)| over the interval
        let oracle = adaptive_simpson(
            &|e: f64| -free_gamma(2, ComplexEnergy::new(e, lambda)).norm().ln(),
            -1.0,
            1.0,
            1e-10,
        ) / 2.0;
        assert!(
            (row.m_hat - oracle).abs() <= 3.0 * row.stderr.max(2e-3),
            "λ={lambda}: {} vs oracle {oracle}",
            row.m_hat
        );
        assert!(row.m_hat <= last + 3.0 * row.stderr, "not decreasing at λ={lambda}");
        assert!(row.m_hat >= log_sqrt_2 - 3.0 * row.stderr.max(2e-3));
        last = row.m_hat;
    }
    assert!(rows.last().unwrap().m_hat - log_sqrt_2 < 0.02, "λ=0.05 should sit near log√2");
}
