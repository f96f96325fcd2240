//! Bounded-potential edge analysis.
//!
//! For supp ρ = [−1,1] the spectrum ends at E_λ = −2√K − λ, and the
//! Lyapunov exponent near the edge is bounded by the free exponent at the
//! shifted energy, L_λ(E) ≲ L₀(E_λ − λ). Below λ* = (√K−1)²/2 that bound
//! stays under log K, so the edge region is in the ac regime. The two
//! probabilistic ingredients behind the bound are checked statistically:
//! the finite-volume small-eigenvalue tail P(inf spec H^{(R)} < E_λ + Δ) ≤
//! C K^R Δ^{3/2}, and the ray-sum bound P(min_x σ(x) < αR) ≤
//! K^R (2√(2‖ρ‖∞α))^R.

use super::{free_lyapunov, Budgets, PhaseError};
use crate::disorder::{DisorderModel, Support};
use crate::greens::{FiniteTreeRealization, TreeGeometry};
use crate::population::lyapunov_boundary;
use crate::seed::RealizationSeed;
use crate::stats;
use nalgebra::DMatrix;

fn require_unit_support(model: &DisorderModel) -> Result<(), PhaseError> {
    match model.support {
        Support::Interval(a, b) if (a + 1.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12 => Ok(()),
        other => Err(PhaseError::UnboundedSupport(other)),
    }
}

#[derive(Debug, Clone)]
pub struct EdgeAnalysis {
    pub k: u32,
    pub lambda: f64,
    /// inf σ(H_λ) = −2√K − λ
    pub e_edge: f64,
    /// (√K − 1)²/2
    pub lambda_star: f64,
    /// L₀(E_λ − λ)
    pub l0_bound: f64,
    /// (E, L̂, stderr) on the near-edge grid
    pub rows: Vec<(f64, f64, f64)>,
    /// every near-edge estimate satisfies L̂ ≤ bound + 3σ
    pub all_below_bound: bool,
    /// λ < λ*, i.e. the bound certifies the ac regime at the edge
    pub edge_ac: bool,
}

pub fn edge_analysis(
    model: &DisorderModel,
    k: u32,
    e_grid: &[f64],
    budgets: &Budgets,
    seed: &RealizationSeed,
) -> Result<EdgeAnalysis, PhaseError> {
    require_unit_support(model)?;
    let kf = k as f64;
    let lambda = model.lambda;
    let e_edge = -2.0 * kf.sqrt() - lambda;
    let lambda_star = (kf.sqrt() - 1.0).powi(2) / 2.0;
    let l0_bound = free_lyapunov(k, e_edge - lambda);

    let grid: Vec<f64> = if e_grid.is_empty() {
        (0..10).map(|i| e_edge + 0.05 * i as f64 / 9.0).collect()
    } else {
        e_grid.to_vec()
    };
    let mut rows = Vec::with_capacity(grid.len());
    for (i, &e) in grid.iter().enumerate() {
        let lb = lyapunov_boundary(model, k, e, &budgets.etas, budgets.pool_size, budgets.sweeps, &seed.child(i as u64));
        rows.push((e, lb.l, lb.stderr));
    }
    let all_below_bound = rows.iter().all(|&(_, l, se)| l <= l0_bound + 3.0 * se);
    Ok(EdgeAnalysis {
        k,
        lambda,
        e_edge,
        lambda_star,
        l0_bound,
        rows,
        all_below_bound,
        edge_ac: lambda < lambda_star && l0_bound < kf.ln(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct LifshitzRow {
    pub delta: f64,
    pub count: usize,
    pub p_hat: f64,
    pub stderr: f64,
    /// fitted bound Ĉ K^R Δ^{3/2}
    pub bound: f64,
    pub in_window: bool,
}

#[derive(Debug, Clone)]
pub struct LifshitzTable {
    pub r: u32,
    pub e_edge: f64,
    pub rows: Vec<LifshitzRow>,
    /// max over the fitted window of p̂/(K^R Δ^{3/2})
    pub c_hat: f64,
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub exponent_ok: bool,
    /// no trial produced a small eigenvalue at any Δ
    pub all_zero: bool,
    /// p̂(Δ) never exceeds the fitted bound by more than 5σ
    pub bound_ok: bool,
}

/// Small-eigenvalue tail of the finite ball: per Δ, the fraction of
/// realizations with inf spec H^{(R)} < E_λ + Δ, fitted against Δ^{3/2}.
/// Only bins with at least 20 positive counts enter the fit (Poisson noise
/// dominates below that), and saturated bins (p̂ > 0.9) are excluded from
/// the decaying window.
pub fn lifshitz_check(
    model: &DisorderModel,
    k: u32,
    r: u32,
    delta_grid: &[f64],
    trials: usize,
    seed: &RealizationSeed,
) -> Result<LifshitzTable, PhaseError> {
    require_unit_support(model)?;
    assert!(r <= 8, "dense eigensolve cap is R = 8");
    assert!(trials >= 100, "too few trials");
    let kf = k as f64;
    let e_edge = -2.0 * kf.sqrt() - model.lambda;
    let geometry = TreeGeometry::rooted(k, r);
    let n = geometry.node_count();

    let mut min_eigs = Vec::with_capacity(trials);
    for t in 0..trials {
        let tree = FiniteTreeRealization::sample(geometry.clone(), model, &seed.child(t as u64));
        let mut h = DMatrix::<f64>::zeros(n, n);
        for v in 0..n as u32 {
            h[(v as usize, v as usize)] = tree.potentials[v as usize];
            for c in geometry.children(v) {
                h[(v as usize, c as usize)] = 1.0;
                h[(c as usize, v as usize)] = 1.0;
            }
        }
        let eigs = h.symmetric_eigenvalues();
        min_eigs.push(eigs.iter().cloned().fold(f64::INFINITY, f64::min));
    }

    let k_pow_r = kf.powi(r as i32);
    let mut rows: Vec<LifshitzRow> = delta_grid
        .iter()
        .map(|&delta| {
            let count = min_eigs.iter().filter(|&&m| m < e_edge + delta).count();
            let p_hat = count as f64 / trials as f64;
            LifshitzRow {
                delta,
                count,
                p_hat,
                stderr: stats::binomial_stderr(p_hat, trials),
                bound: f64::NAN,
                in_window: count >= 20 && p_hat <= 0.9,
            }
        })
        .collect();

    let window: Vec<&LifshitzRow> = rows.iter().filter(|r| r.in_window).collect();
    let all_zero = rows.iter().all(|r| r.count == 0);
    let (c_hat, exponent, exponent_stderr) = if window.len() >= 2 {
        let c_hat = window
            .iter()
            .map(|r| r.p_hat / (k_pow_r * r.delta.powf(1.5)))
            .fold(0.0f64, f64::max);
        let xs: Vec<f64> = window.iter().map(|r| r.delta.ln()).collect();
        let ys: Vec<f64> = window.iter().map(|r| r.p_hat.ln()).collect();
        let fit = stats::fit_line(&xs, &ys);
        (c_hat, fit.slope, fit.slope_stderr)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    for row in rows.iter_mut() {
        row.bound = c_hat * k_pow_r * row.delta.powf(1.5);
    }
    let bound_ok = rows
        .iter()
        .filter(|r| r.in_window)
        .all(|r| r.p_hat <= r.bound + 5.0 * r.stderr);
    Ok(LifshitzTable {
        r,
        e_edge,
        rows,
        c_hat,
        exponent,
        exponent_stderr,
        exponent_ok: exponent >= 1.2,
        all_zero,
        bound_ok,
    })
}

#[derive(Debug, Clone)]
pub struct RaySumCheck {
    pub r: u32,
    pub alpha: f64,
    pub bound: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub pass: bool,
    pub min_observed: f64,
}

/// P(min_{x∈S_R} σ(x) < αR) against K^R (2√(2‖ρ‖∞α))^R, where σ(x) sums
/// V(y)+1 along the root ray to x.
pub fn ray_sum_check(
    model: &DisorderModel,
    k: u32,
    r: u32,
    alpha: f64,
    trials: usize,
    seed: &RealizationSeed,
) -> Result<RaySumCheck, PhaseError> {
    require_unit_support(model)?;
    let kf = k as f64;
    let alpha_max = 1.0 / (8.0 * model.sup_norm * kf * kf);
    if !(alpha > 0.0 && alpha <= alpha_max) {
        return Err(PhaseError::BadRayAlpha { alpha, max: alpha_max });
    }
    let geometry = TreeGeometry::rooted(k, r);
    let n = geometry.node_count();
    let threshold = alpha * r as f64;
    let mut hits = 0usize;
    let mut min_observed = f64::INFINITY;
    let mut rng = seed.rng();
    let mut path_sums = vec![0.0f64; n];
    for _ in 0..trials {
        let mut min_ray = f64::INFINITY;
        for v in 0..n as u32 {
            let vpot = model.sample_one(&mut rng);
            let above = geometry.parent(v).map_or(0.0, |p| path_sums[p as usize]);
            let s = above + vpot + 1.0;
            path_sums[v as usize] = s;
            if geometry.is_leaf(v) {
                min_ray = min_ray.min(s);
            }
        }
        min_observed = min_observed.min(min_ray);
        if min_ray < threshold {
            hits += 1;
        }
    }
    let p_hat = hits as f64 / trials as f64;
    let stderr = stats::binomial_stderr(p_hat, trials);
    let bound = kf.powi(r as i32) * (2.0 * (2.0 * model.sup_norm * alpha).sqrt()).powi(r as i32);
    Ok(RaySumCheck {
        r,
        alpha,
        bound,
        p_hat,
        stderr,
        pass: p_hat <= bound + 5.0 * stderr,
        min_observed,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct IntervalAverageRow {
    pub lambda: f64,
    /// trapezoid average M̂_λ(I) of L̂ over the interval
    pub m_hat: f64,
    pub stderr: f64,
    /// Chebyshev bound |I|(M̂ − log√K)/log√K on the measure of {L ≥ log K}
    pub bad_set_bound: f64,
}

pub fn lyapunov_interval_average(
    model: &DisorderModel,
    k: u32,
    interval: (f64, f64),
    points: usize,
    lambda_grid: &[f64],
    budgets: &Budgets,
    seed: &RealizationSeed,
) -> Vec<IntervalAverageRow> {
    assert!(points >= 2 && interval.1 > interval.0);
    let (lo, hi) = interval;
    let e_grid: Vec<f64> =
        (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let log_sqrt_k = 0.5 * (k as f64).ln();
    lambda_grid
        .iter()
        .enumerate()
        .map(|(il, &lambda)| {
            let m = model.with_lambda(lambda);
            let mut weighted = 0.0;
            let mut var = 0.0;
            for (ie, &e) in e_grid.iter().enumerate() {
                let w = if ie == 0 || ie == points - 1 { 0.5 } else { 1.0 };
                let (l, se) = if lambda == 0.0 {
                    (free_lyapunov(k, e), 0.0)
                } else {
                    let lb = lyapunov_boundary(
                        &m,
                        k,
                        e,
                        &budgets.etas,
                        budgets.pool_size,
                        budgets.sweeps,
                        &seed.child(il as u64).child(ie as u64),
                    );
                    (lb.l, lb.stderr)
                };
                weighted += w * l;
                var += (w * se).powi(2);
            }
            let norm = points as f64 - 1.0;
            let m_hat = weighted / norm;
            let stderr = var.sqrt() / norm;
            let bad_set_bound = ((hi - lo) * (m_hat - log_sqrt_k) / log_sqrt_k).max(0.0);
            IntervalAverageRow { lambda, m_hat, stderr, bad_set_bound }
        })
        .collect()
}
