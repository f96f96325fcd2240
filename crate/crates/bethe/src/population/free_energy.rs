//! Free energy of the fractional moments, φ(s;ζ) = lim |x|⁻¹ log E[|G(0,x)|^s],
//! and its Legendre-transform rate function.
//!
//! φ̂(s) is the slope of log Ê[∏_{j≤m}|Γ_j|^s] against m over the window
//! m ∈ [n/2, n]; the finite-size (Fekete) correction is absorbed into the
//! intercept. Expectations accumulate in the log domain with max shifts,
//! the error bar is a chain-level bootstrap, and for s ≥ 0.7 the mean is
//! replaced by a median of means over 10 chain blocks to tame the heavy
//! tails of the fractional moments near s = 1.

use super::chain::ChainSet;
use super::pool::GammaPool;
use crate::disorder::DisorderModel;
use crate::seed::RealizationSeed;
use crate::stats;
use rand::Rng;

pub const BOOTSTRAP_RESAMPLES: usize = 200;
const MEDIAN_OF_MEANS_BLOCKS: usize = 10;
const MEDIAN_OF_MEANS_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone)]
pub struct FreeEnergyCurve {
    pub s_grid: Vec<f64>,
    pub phi: Vec<f64>,
    pub stderr: Vec<f64>,
    /// top 1% of chain weights carried more than half of Ê at this s
    pub flagged: Vec<bool>,
    pub n: usize,
    pub eta: f64,
    pub k: u32,
}

impl FreeEnergyCurve {
    pub fn point(&self, i: usize) -> (f64, f64, f64) {
        (self.s_grid[i], self.phi[i], self.stderr[i])
    }

    /// Piecewise-linear interpolant slope on the segment containing s.
    pub fn slope_at(&self, s: f64) -> f64 {
        let grid = &self.s_grid;
        let mut i = grid.partition_point(|&g| g < s);
        i = i.clamp(1, grid.len() - 1);
        (self.phi[i] - self.phi[i - 1]) / (grid[i] - grid[i - 1])
    }

    pub fn value_at(&self, s: f64) -> f64 {
        let grid = &self.s_grid;
        let mut i = grid.partition_point(|&g| g < s);
        i = i.clamp(1, grid.len() - 1);
        let t = (s - grid[i - 1]) / (grid[i] - grid[i - 1]);
        self.phi[i - 1] * (1.0 - t) + self.phi[i] * t
    }
}

/// φ̂ over `s_grid` from `chains` chains of length `n` sampled against the
/// pool. The grid must stay within [−ς, 0.95].
pub fn estimate_free_energy(
    pool: &GammaPool,
    model: &DisorderModel,
    s_grid: &[f64],
    n: usize,
    chains: usize,
    seed: &RealizationSeed,
) -> FreeEnergyCurve {
    assert!(n >= 16, "chain length too short for a slope window");
    assert!(chains >= 8, "need several chains");
    assert!(
        s_grid.iter().all(|&s| s >= -model.moment_exponent - 1e-12 && s <= 0.95),
        "s grid must lie in [-moment_exponent, 0.95]"
    );
    let mut rng = seed.rng();
    let set = ChainSet::generate(pool, model, n, chains, &mut rng);
    let window: Vec<usize> = (n / 2..=n).collect();

    let mut phi = Vec::with_capacity(s_grid.len());
    let mut flagged = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        phi.push(slope_for(&set, s, &window, None));
        flagged.push(heavy_tail(&set, s));
    }

    // chain-level bootstrap, one resample set reused across the grid
    let mut boot_rng = seed.child(0xb007).rng();
    let mut replicates = vec![Vec::with_capacity(BOOTSTRAP_RESAMPLES); s_grid.len()];
    let mut indices = vec![0usize; chains];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for idx in indices.iter_mut() {
            *idx = boot_rng.gen_range(0..chains);
        }
        for (j, &s) in s_grid.iter().enumerate() {
            replicates[j].push(slope_for(&set, s, &window, Some(&indices)));
        }
    }
    let stderr: Vec<f64> = replicates.iter().map(|r| stats::std_dev(r)).collect();

    FreeEnergyCurve {
        s_grid: s_grid.to_vec(),
        phi,
        stderr,
        flagged,
        n,
        eta: pool.zeta.eta,
        k: pool.k,
    }
}

/// Slope of m ↦ log Ê[∏_{j≤m}|Γ_j|^s] over the window, optionally on a
/// bootstrap resample. s = 0 gives exactly zero.
fn slope_for(set: &ChainSet, s: f64, window: &[usize], resample: Option<&[usize]>) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let median_of_means = s >= MEDIAN_OF_MEANS_THRESHOLD;
    let count = resample.map_or(set.len(), <[usize]>::len);
    let chain_at = |i: usize| -> &Vec<f64> {
        let idx = resample.map_or(i, |r| r[i]);
        &set.cumulative[idx]
    };
    let ys: Vec<f64> = window
        .iter()
        .map(|&m| {
            if median_of_means {
                let block = (count / MEDIAN_OF_MEANS_BLOCKS).max(1);
                let mut block_means = Vec::with_capacity(MEDIAN_OF_MEANS_BLOCKS);
                let mut start = 0;
                while start < count {
                    let end = (start + block).min(count);
                    let logs: Vec<f64> = (start..end).map(|i| s * chain_at(i)[m]).collect();
                    block_means.push(stats::log_mean_exp(&logs));
                    start = end;
                }
                stats::median(&block_means)
            } else {
                let logs: Vec<f64> = (0..count).map(|i| s * chain_at(i)[m]).collect();
                stats::log_mean_exp(&logs)
            }
        })
        .collect();
    let xs: Vec<f64> = window.iter().map(|&m| m as f64).collect();
    stats::fit_line(&xs, &ys).slope
}

/// Do the top 1% of chain weights at full length carry more than half of Ê?
fn heavy_tail(set: &ChainSet, s: f64) -> bool {
    if s == 0.0 {
        return false;
    }
    let mut logs: Vec<f64> = set.cumulative.iter().map(|c| s * c[set.n]).collect();
    logs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top = ((set.len() as f64 * 0.01).ceil() as usize).max(1);
    let top_mass = stats::log_sum_exp(&logs[..top]);
    let total = stats::log_sum_exp(&logs);
    (top_mass - total).exp() > 0.5
}

/// φ(1;E) is defined only as the limit s ↑ 1; report the linear
/// extrapolation of the last three grid points with the spread of the
/// two-point extrapolations (plus the propagated error bar) as its error.
#[derive(Debug, Clone, Copy)]
pub struct Phi1 {
    pub value: f64,
    pub spread: f64,
}

pub fn phi1_extrapolated(curve: &FreeEnergyCurve) -> Phi1 {
    let m = curve.s_grid.len();
    assert!(m >= 3, "need at least three grid points to extrapolate");
    let (s1, p1) = (curve.s_grid[m - 3], curve.phi[m - 3]);
    let (s2, p2) = (curve.s_grid[m - 2], curve.phi[m - 2]);
    let (s3, p3) = (curve.s_grid[m - 1], curve.phi[m - 1]);
    let line = |sa: f64, pa: f64, sb: f64, pb: f64| pb + (pb - pa) / (sb - sa) * (1.0 - sb);
    let v12 = line(s1, p1, s2, p2);
    let v23 = line(s2, p2, s3, p3);
    let v13 = line(s1, p1, s3, p3);
    let value = v23;
    let lines = [v12, v23, v13];
    let spread_lines = lines.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - lines.iter().cloned().fold(f64::INFINITY, f64::min);
    // amplification of the endpoint error bar under extrapolation to s = 1
    let amp = 1.0 + (1.0 - s3) / (s3 - s2);
    let spread = spread_lines + amp * curve.stderr[m - 1].max(curve.stderr[m - 2]);
    Phi1 { value, spread }
}

/// Rate function I(γ) = −inf_s [φ(s) + sγ] of the piecewise-linear
/// interpolant; the minimum over a piecewise-linear function sits on a grid
/// vertex, so the minimization is exact.
#[derive(Debug, Clone)]
pub struct RateFunction {
    pub gamma_grid: Vec<f64>,
    pub rate: Vec<f64>,
    pub s_of_gamma: Vec<f64>,
}

/// I(γ) with its minimizing s, for one γ.
pub fn legendre_at(curve: &FreeEnergyCurve, gamma: f64) -> (f64, f64) {
    let mut best = f64::INFINITY;
    let mut best_s = curve.s_grid[0];
    for (i, &s) in curve.s_grid.iter().enumerate() {
        let v = curve.phi[i] + s * gamma;
        if v < best {
            best = v;
            best_s = s;
        }
    }
    (-best, best_s)
}

/// I over a grid spanning the attainable slopes −Δφ/Δs.
pub fn legendre_rate(curve: &FreeEnergyCurve) -> RateFunction {
    assert!(curve.s_grid.len() >= 8, "curve too coarse for a rate function");
    let slopes: Vec<f64> = curve
        .s_grid
        .windows(2)
        .zip(curve.phi.windows(2))
        .map(|(s, p)| -(p[1] - p[0]) / (s[1] - s[0]))
        .collect();
    let lo = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let count = 65;
    let gamma_grid: Vec<f64> = if (hi - lo).abs() < 1e-12 {
        vec![lo]
    } else {
        (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
    };
    let mut rate = Vec::with_capacity(gamma_grid.len());
    let mut s_of_gamma = Vec::with_capacity(gamma_grid.len());
    for &g in &gamma_grid {
        let (i, s) = legendre_at(curve, g);
        rate.push(i);
        s_of_gamma.push(s);
    }
    RateFunction { gamma_grid, rate, s_of_gamma }
}

/// Dual route back: φ(s) = −inf_γ [I(γ) + sγ].
pub fn legendre_dual(rate: &RateFunction, s: f64) -> f64 {
    -rate
        .gamma_grid
        .iter()
        .zip(&rate.rate)
        .map(|(&g, &i)| i + s * g)
        .fold(f64::INFINITY, f64::min)
}

/// Supermultiplicativity diagnostics: log α̂_{n+m+1} compared against
/// log α̂_n + log α̂_m with an empirically fitted constant.
#[derive(Debug, Clone)]
pub struct FeketePair {
    pub n: usize,
    pub m: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct FeketeReport {
    pub s: f64,
    pub log_alpha: Vec<f64>,
    pub log_alpha_stderr: Vec<f64>,
    pub log_c_hat: f64,
    pub pairs: Vec<FeketePair>,
    pub all_ok: bool,
}

/// α̂_m = Ê[|∏_{j≤m} Γ_j|^s] from `chains` restricted chains per length m.
/// The deepest chain element uses K−1 pool draws (the forward branch toward
/// the next vertex removed), matching the restricted Green function whose
/// moments are super/sub-multiplicative. Ĉ is fitted on lengths
/// n+m+1 ≤ `fit_max` and checked on all pairs up to `check_max`.
pub fn fekete_consistency(
    pool: &GammaPool,
    model: &DisorderModel,
    s: f64,
    chains: usize,
    fit_max: usize,
    check_max: usize,
    seed: &RealizationSeed,
) -> FeketeReport {
    let mut rng = seed.rng();
    let z = pool.zeta.as_c64();
    let max_len = check_max;
    // restricted chain of length m has m+1 factors; final (deepest) factor
    // built from K−1 draws
    let mut log_alpha = vec![0.0; max_len + 1];
    let mut log_alpha_stderr = vec![0.0; max_len + 1];
    for m in 0..=max_len {
        let mut logs = Vec::with_capacity(chains);
        for _ in 0..chains {
            let mut sum = num_complex::Complex64::default();
            for _ in 1..pool.k {
                sum += pool.draw(&mut rng);
            }
            let pot = model.lambda * model.sample_one(&mut rng);
            let mut g = (num_complex::Complex64::new(pot, 0.0) - z - sum).inv();
            let mut acc = g.norm().ln();
            for _ in 0..m {
                let mut sum = g;
                for _ in 1..pool.k {
                    sum += pool.draw(&mut rng);
                }
                let pot = model.lambda * model.sample_one(&mut rng);
                g = (num_complex::Complex64::new(pot, 0.0) - z - sum).inv();
                acc += g.norm().ln();
            }
            logs.push(s * acc);
        }
        log_alpha[m] = stats::log_mean_exp(&logs);
        // jackknife-style block error in the log domain
        let blocks = 20.min(chains / 8).max(2);
        let block_len = chains / blocks;
        let block_vals: Vec<f64> = (0..blocks)
            .map(|b| stats::log_mean_exp(&logs[b * block_len..(b + 1) * block_len]))
            .collect();
        log_alpha_stderr[m] = stats::std_dev(&block_vals) / (blocks as f64).sqrt();
    }

    let mut log_c_hat = 0.0f64;
    for n in 0..=fit_max {
        for m in 0..=fit_max {
            if n + m + 1 > fit_max {
                continue;
            }
            let gap = (log_alpha[n + m + 1] - log_alpha[n] - log_alpha[m]).abs();
            log_c_hat = log_c_hat.max(gap);
        }
    }

    let mut pairs = Vec::new();
    for n in 0..=check_max {
        for m in n..=check_max {
            if n + m + 1 > check_max {
                continue;
            }
            let lhs = log_alpha[n + m + 1];
            let rhs = log_alpha[n] + log_alpha[m];
            let sigma = (log_alpha_stderr[n + m + 1].powi(2)
                + log_alpha_stderr[n].powi(2)
                + log_alpha_stderr[m].powi(2))
            .sqrt();
            let slack = log_c_hat + 5.0 * sigma;
            let ok = (lhs - rhs).abs() <= slack;
            pairs.push(FeketePair { n, m, lhs, rhs, slack, ok });
        }
    }
    let all_ok = pairs.iter().all(|p| p.ok);
    FeketeReport { s, log_alpha, log_alpha_stderr, log_c_hat, pairs, all_ok }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::DisorderModel;
    use crate::greens::ComplexEnergy;
    use crate::population::pool_equilibrate;

    fn curve_free() -> FreeEnergyCurve {
        let model = DisorderModel::uniform_symmetric(0.0).unwrap();
        let zeta = ComplexEnergy::new(0.0, 1e-3);
        let seed = RealizationSeed::with_path(303, &[0]);
        let pool = pool_equilibrate(&model, 2, zeta, 256, 60, &seed);
        let s_grid = [-0.5, -0.25, -0.05, 0.0, 0.05, 0.25, 0.5, 0.7, 0.85, 0.95];
        estimate_free_energy(&pool, &model, &s_grid, 32, 64, &seed.child(1))
    }

    fn free_l_at(eta: f64) -> f64 {
        -crate::greens::free_gamma(2, ComplexEnergy::new(0.0, eta)).norm().ln()
    }

    #[test]
    fn free_curve_is_linear_with_slope_minus_l() {
        let curve = curve_free();
        let l = free_l_at(curve.eta);
        for (i, &s) in curve.s_grid.iter().enumerate() {
            assert!(
                (curve.phi[i] - (-s * l)).abs() < 1e-6,
                "phi({s}) = {} vs {}",
                curve.phi[i],
                -s * l
            );
        }
        // phi(0) = 0 exactly and its error bar is exactly zero
        let zero_idx = curve.s_grid.iter().position(|&s| s == 0.0).unwrap();
        assert_eq!(curve.phi[zero_idx], 0.0);
        assert_eq!(curve.stderr[zero_idx], 0.0);
    }

    #[test]
    fn phi1_extrapolation_free_case() {
        let curve = curve_free();
        let l = free_l_at(curve.eta);
        let phi1 = phi1_extrapolated(&curve);
        assert!((phi1.value - (-l)).abs() < 1e-5, "phi1 = {}", phi1.value);
        assert!(phi1.spread < 1e-4);
    }

    #[test]
    fn legendre_of_linear_curve() {
        let curve = curve_free();
        let l = free_l_at(curve.eta);
        // I(γ) = ς(γ−L) above L and s_max(L−γ) below, on the clipped grid
        let d = 0.3;
        let (above, s_above) = legendre_at(&curve, l + d);
        assert!((above - 0.5 * d).abs() < 1e-5, "above = {above}");
        assert!((s_above - -0.5).abs() < 1e-12);
        let (below, s_below) = legendre_at(&curve, l - d);
        assert!((below - 0.95 * d).abs() < 1e-5, "below = {below}");
        assert!((s_below - 0.95).abs() < 1e-12);
        let (at_l, _) = legendre_at(&curve, l);
        assert!(at_l.abs() < 1e-6);
    }

    #[test]
    fn rate_function_nonnegative_and_convex() {
        let model = DisorderModel::cauchy(0.0, 1.0, 0.3).unwrap();
        let zeta = ComplexEnergy::new(0.0, 1e-3);
        let seed = RealizationSeed::with_path(304, &[0]);
        let pool = pool_equilibrate(&model, 2, zeta, 4000, 60, &seed);
        let s_grid = [-0.5, -0.25, -0.1, 0.0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95];
        let curve = estimate_free_energy(&pool, &model, &s_grid, 32, 600, &seed.child(1));
        let rf = legendre_rate(&curve);
        for &i in &rf.rate {
            assert!(i >= -1e-9, "rate dips negative: {i}");
        }
        for w in rf.rate.windows(3) {
            // uniform gamma grid: convexity is nonnegative second differences
            assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-9);
        }
        // duality round trip within interpolation error
        let step = if rf.gamma_grid.len() > 1 {
            rf.gamma_grid[1] - rf.gamma_grid[0]
        } else {
            0.0
        };
        let max_s = curve.s_grid.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        for &s in &[0.0, 0.25, 0.5] {
            let dual = legendre_dual(&rf, s);
            let tol = 2.0 * step * max_s + 1e-9;
            assert!(
                (dual - curve.value_at(s)).abs() <= tol,
                "s = {s}: dual {dual} vs phi {}",
                curve.value_at(s)
            );
        }
    }

    #[test]
    fn monotone_and_convex_within_errors() {
        let model = DisorderModel::cauchy(0.0, 1.0, 0.3).unwrap();
        let zeta = ComplexEnergy::new(0.0, 1e-3);
        let seed = RealizationSeed::with_path(305, &[0]);
        let pool = pool_equilibrate(&model, 2, zeta, 4000, 60, &seed);
        let s_grid = [-0.25, -0.1, 0.0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75];
        let curve = estimate_free_energy(&pool, &model, &s_grid, 32, 800, &seed.child(1));
        for i in 1..curve.s_grid.len() {
            let tol = 3.0 * (curve.stderr[i] + curve.stderr[i - 1]);
            assert!(curve.phi[i] <= curve.phi[i - 1] + tol, "not decreasing at i={i}");
        }
        for i in 2..curve.s_grid.len() {
            let (s0, s1, s2) = (curve.s_grid[i - 2], curve.s_grid[i - 1], curve.s_grid[i]);
            let lin = curve.phi[i - 2] + (curve.phi[i] - curve.phi[i - 2]) * (s1 - s0) / (s2 - s0);
            let tol = 3.0 * (curve.stderr[i] + curve.stderr[i - 1] + curve.stderr[i - 2]);
            assert!(curve.phi[i - 1] <= lin + tol, "convexity violated at i={i}");
        }
    }
}
