//! Statistical verification of the probabilistic bounds: the weak-L¹ and
//! fractional-moment conditional estimates, the two-site tail with the
//! Krein coupling, the chain large-deviation upper bound with its tilted
//! concentration margins, and the Im Γ tightness diagnostic.

use crate::disorder::DisorderModel;
use crate::greens::{
    dense_green_oracle, krein_offdiag, ComplexEnergy, FiniteTreeRealization, TreeGeometry,
    TreePasses,
};
use crate::population::{
    legendre_at, percentile_xi, pool_equilibrate, ChainSet, FreeEnergyCurve, GammaPool,
};
use crate::seed::RealizationSeed;
use crate::stats;
use num_complex::Complex64;

// ---------------------------------------------------------------------------
// weak-L1 / fractional moment / two-site suite
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct WeakL1Row {
    pub t: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct TwoSiteRow {
    pub t: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct WeakL1Report {
    /// conditional single-site tail P(|G(x,x)| > t | others) vs 2‖ρ‖∞/(λt)
    pub single_site: Vec<WeakL1Row>,
    /// conditional fractional moment at exponent s vs 2^s‖ρ‖∞^s/((1−s)λ^s)
    pub moment_s: f64,
    pub moment_empirical: f64,
    pub moment_stderr: f64,
    pub moment_bound: f64,
    pub moment_ok: bool,
    /// joint two-site tail vs the Krein-coupling bound
    pub two_site: Vec<TwoSiteRow>,
    /// independent-site variant (coupling → 0)
    pub disconnected: Vec<TwoSiteRow>,
    pub coupling_abs: f64,
    pub all_ok: bool,
}

/// Freeze every potential except at the probe sites of a depth-`depth`
/// ball, then resample the probe potentials `trials` times.
pub fn weak_l1_suite(
    model: &DisorderModel,
    k: u32,
    depth: u32,
    zeta: ComplexEnergy,
    t_grid: &[f64],
    s: f64,
    trials: usize,
    seed: &RealizationSeed,
) -> WeakL1Report {
    assert!(model.lambda > 0.0, "weak-L1 bounds need λ > 0");
    assert!(s > 0.0 && s < 1.0);
    let lambda = model.lambda;
    let geometry = TreeGeometry::rooted(k, depth);
    let tree = FiniteTreeRealization::sample(geometry.clone(), model, &seed.child(0));
    // probe sites: two non-adjacent, non-ancestral vertices away from the root
    let x = geometry.sphere(depth - 1).start;
    let y = geometry.sphere(depth - 1).end - 1;
    let passes = TreePasses::new(&tree, zeta);
    let sigma_x = passes.self_energy(x);

    let mut rng = seed.child(1).rng();
    let draws: Vec<f64> = (0..trials).map(|_| model.sample_one(&mut rng)).collect();

    // (i) single-site tail, conditional on everything else
    let gs: Vec<f64> = draws
        .iter()
        .map(|&v| (Complex64::new(lambda * v, 0.0) - sigma_x).norm().recip())
        .collect();
    let single_site: Vec<WeakL1Row> = t_grid
        .iter()
        .map(|&t| {
            let p = gs.iter().filter(|&&g| g > t).count() as f64 / trials as f64;
            let se = stats::binomial_stderr(p, trials);
            let bound = 2.0 * model.sup_norm / (lambda * t);
            WeakL1Row { t, empirical: p, stderr: se, bound, ok: p <= bound + 5.0 * se }
        })
        .collect();

    // (ii) conditional fractional moment
    let powers: Vec<f64> = gs.iter().map(|&g| g.powf(s)).collect();
    let moment_empirical = stats::mean(&powers);
    let moment_stderr = stats::stderr_mean(&powers);
    let moment_bound = 2.0f64.powf(s) * model.sup_norm.powf(s) / ((1.0 - s) * lambda.powf(s));
    let moment_ok = moment_empirical <= moment_bound + 5.0 * moment_stderr;

    // (iii) two-site joint tail through the rank-two Krein reduction
    let krein = krein_offdiag(&tree, zeta, x, y).expect("probe sites are regular");
    let coupling_abs = krein.two_site.norm();
    // full 2x2 coupling matrix from the V(x) = V(y) = 0 Green block
    let mut zeroed = tree.clone();
    zeroed.potentials[x as usize] = 0.0;
    zeroed.potentials[y as usize] = 0.0;
    let block = dense_green_oracle(&zeroed, zeta, &[(x, x), (x, y), (y, x), (y, y)]).unwrap();
    let (gxx, gxy, gyx, gyy) = (
        block.get(x, x).unwrap(),
        block.get(x, y).unwrap(),
        block.get(y, x).unwrap(),
        block.get(y, y).unwrap(),
    );
    let det = gxx * gyy - gxy * gyx;
    let a = [[gyy / det, -gxy / det], [-gyx / det, gxx / det]];

    let mut rng2 = seed.child(2).rng();
    let joint: Vec<(f64, f64)> = (0..trials)
        .map(|_| {
            let vx = lambda * model.sample_one(&mut rng2);
            let vy = lambda * model.sample_one(&mut rng2);
            let m00 = a[0][0] + vx;
            let m11 = a[1][1] + vy;
            let det = m00 * m11 - a[0][1] * a[1][0];
            ((m11 / det).norm(), (m00 / det).norm())
        })
        .collect();
    let two_site: Vec<TwoSiteRow> = t_grid
        .iter()
        .map(|&t| {
            let p = joint.iter().filter(|&&(gx, gy)| gx > t && gy > t).count() as f64
                / trials as f64;
            let se = stats::binomial_stderr(p, trials);
            let bound = two_site_bound(model, coupling_abs, t);
            TwoSiteRow { t, empirical: p, stderr: se, bound, ok: p <= bound + 5.0 * se }
        })
        .collect();

    // disconnected variant: two independent single-site resolvents
    let tree_b = FiniteTreeRealization::sample(geometry, model, &seed.child(3));
    let sigma_y = TreePasses::new(&tree_b, zeta).self_energy(y);
    let mut rng3 = seed.child(4).rng();
    let indep: Vec<(f64, f64)> = (0..trials)
        .map(|_| {
            let vx = lambda * model.sample_one(&mut rng3);
            let vy = lambda * model.sample_one(&mut rng3);
            (
                (Complex64::new(vx, 0.0) - sigma_x).norm().recip(),
                (Complex64::new(vy, 0.0) - sigma_y).norm().recip(),
            )
        })
        .collect();
    let disconnected: Vec<TwoSiteRow> = t_grid
        .iter()
        .map(|&t| {
            let p = indep.iter().filter(|&&(gx, gy)| gx > t && gy > t).count() as f64
                / trials as f64;
            let se = stats::binomial_stderr(p, trials);
            let bound = two_site_bound(model, 0.0, t);
            TwoSiteRow { t, empirical: p, stderr: se, bound, ok: p <= bound + 5.0 * se }
        })
        .collect();

    let all_ok = single_site.iter().all(|r| r.ok)
        && moment_ok
        && two_site.iter().all(|r| r.ok)
        && disconnected.iter().all(|r| r.ok);
    WeakL1Report {
        single_site,
        moment_s: s,
        moment_empirical,
        moment_stderr,
        moment_bound,
        moment_ok,
        two_site,
        disconnected,
        coupling_abs,
        all_ok,
    }
}

/// (2‖ρ‖∞/(λ²t))·min{4‖ρ‖∞(|A| + 1/t), 1}
fn two_site_bound(model: &DisorderModel, coupling_abs: f64, t: f64) -> f64 {
    let r = model.sup_norm;
    2.0 * r / (model.lambda.powi(2) * t) * (4.0 * r * (coupling_abs + 1.0 / t)).min(1.0)
}

// ---------------------------------------------------------------------------
// chain large deviations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct B8Row {
    pub n: usize,
    pub p_hat: f64,
    pub stderr: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct BandReport {
    pub ells: Vec<usize>,
    pub exit_fraction: Vec<f64>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub kappa_over_3: f64,
    pub ok: bool,
    pub insufficient_decay: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct OverlayRow {
    pub t: f64,
    pub n: usize,
    pub psi: f64,
    pub stderr: f64,
    pub deviation_ok: bool,
}

#[derive(Debug, Clone)]
pub struct LdpReport {
    pub s: f64,
    pub gamma: f64,
    pub i_gamma: f64,
    pub kappa_hat: f64,
    pub b8: Vec<B8Row>,
    pub band: BandReport,
    pub overlay: Vec<OverlayRow>,
    pub overlay_ok: bool,
    pub all_bounds_ok: bool,
}

/// Tilted concentration margin κ(ε) = min(κ₊, κ₋) evaluated on the
/// piecewise-linear fitted free energy at tilt s; strictly positive for a
/// convex curve and any ε > 0.
pub fn kappa_hat(curve: &FreeEnergyCurve, s: f64, epsilon: f64) -> f64 {
    let slope = curve.slope_at(s);
    let psi_s = curve.value_at(s);
    let mut k_plus = f64::NEG_INFINITY;
    let mut k_minus = f64::NEG_INFINITY;
    for (i, &t) in curve.s_grid.iter().enumerate() {
        let d = t - s;
        if d > 1e-12 {
            k_plus = k_plus.max(psi_s + (slope + epsilon) * d - curve.phi[i]);
        } else if d < -1e-12 {
            k_minus = k_minus.max(psi_s + (slope - epsilon) * d - curve.phi[i]);
        }
    }
    k_plus.min(k_minus)
}

/// Checks the three chain large-deviation statements at the tilt `s_check`:
/// (i) P(∏_{j≤n}|Γ_j| ≥ e^{−(γ+ε)n}) ≤ e^{(−I(γ)+2ε)n} across `n_grid`;
/// (ii) under the s-tilted measure the fraction of chains leaving the
/// ε-band around e^{−γℓ} decays at least like e^{−κℓ/3};
/// (iii) the normalized cumulant curves ψ_N(t) overlay as N grows.
#[allow(clippy::too_many_arguments)]
pub fn ldp_bounds_check(
    pool: &GammaPool,
    model: &DisorderModel,
    curve: &FreeEnergyCurve,
    s_check: f64,
    epsilon: f64,
    n_grid: &[usize],
    chains: usize,
    seed: &RealizationSeed,
) -> LdpReport {
    let gamma = -curve.slope_at(s_check);
    let (i_gamma, _) = legendre_at(curve, gamma);
    let kappa = kappa_hat(curve, s_check, epsilon);
    let n_max = *n_grid.iter().max().unwrap();
    let mut rng = seed.rng();
    let set = ChainSet::generate(pool, model, n_max, chains, &mut rng);
    // log of the product of the first m factors
    let first = |c: &Vec<f64>, m: usize| c[m - 1];

    // (i) upper bound at each n
    let b8: Vec<B8Row> = n_grid
        .iter()
        .map(|&n| {
            let thr = -(gamma + epsilon) * n as f64;
            let hits =
                set.cumulative.iter().filter(|c| first(c, n) >= thr).count();
            let p_hat = hits as f64 / chains as f64;
            let stderr = stats::binomial_stderr(p_hat, chains);
            let bound = ((-i_gamma + 2.0 * epsilon) * n as f64).exp();
            B8Row { n, p_hat, stderr, bound, ok: p_hat <= bound + 5.0 * stderr }
        })
        .collect();

    // (ii) tilted band exits
    let log_w: Vec<f64> = set.cumulative.iter().map(|c| s_check * c[n_max]).collect();
    let w_max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|lw| (lw - w_max).exp()).collect();
    let w_total: f64 = weights.iter().sum();
    let ells: Vec<usize> = n_grid.to_vec();
    let exit_fraction: Vec<f64> = ells
        .iter()
        .map(|&ell| {
            let mut exited = 0.0;
            for (c, w) in set.cumulative.iter().zip(&weights) {
                let lo = -(gamma + epsilon) * ell as f64;
                let hi = -(gamma - epsilon) * ell as f64;
                let v = first(c, ell);
                if v < lo || v > hi {
                    exited += w;
                }
            }
            exited / w_total
        })
        .collect();
    let fit_points: Vec<(f64, f64)> = ells
        .iter()
        .zip(&exit_fraction)
        .filter(|&(_, &f)| f > 0.0)
        .map(|(&l, &f)| (l as f64, f.ln()))
        .collect();
    let band = if fit_points.len() >= 2 {
        let xs: Vec<f64> = fit_points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = fit_points.iter().map(|p| p.1).collect();
        let fit = stats::fit_line(&xs, &ys);
        let ok = fit.slope <= -kappa / 3.0 + 2.0 * fit.slope_stderr.max(1e-12);
        BandReport {
            ells,
            exit_fraction,
            slope: fit.slope,
            slope_stderr: fit.slope_stderr,
            kappa_over_3: kappa / 3.0,
            ok,
            insufficient_decay: false,
        }
    } else {
        // fractions already hit zero: decay is faster than any fitted rate
        BandReport {
            ells,
            exit_fraction,
            slope: f64::NEG_INFINITY,
            slope_stderr: f64::NAN,
            kappa_over_3: kappa / 3.0,
            ok: true,
            insufficient_decay: true,
        }
    };

    // (iii) ψ_N(t) overlay against the largest N, on an interior t grid
    let t_grid: Vec<f64> =
        curve.s_grid.iter().cloned().filter(|&t| (-0.4..=0.6).contains(&t)).collect();
    let blocks = 10;
    let psi = |n: usize, t: f64, lo: usize, hi: usize| -> f64 {
        let logs: Vec<f64> =
            set.cumulative[lo..hi].iter().map(|c| t * first(c, n)).collect();
        stats::log_mean_exp(&logs) / n as f64
    };
    let mut overlay = Vec::new();
    let mut overlay_ok = true;
    let n_ref = n_max;
    for &t in &t_grid {
        let block_len = chains / blocks;
        for &n in n_grid {
            let full = psi(n, t, 0, chains);
            let block_vals: Vec<f64> =
                (0..blocks).map(|b| psi(n, t, b * block_len, (b + 1) * block_len)).collect();
            let se = stats::std_dev(&block_vals) / (blocks as f64).sqrt();
            let full_ref = psi(n_ref, t, 0, chains);
            let ref_vals: Vec<f64> =
                (0..blocks).map(|b| psi(n_ref, t, b * block_len, (b + 1) * block_len)).collect();
            let se_ref = stats::std_dev(&ref_vals) / (blocks as f64).sqrt();
            // finite-n drift of ψ_N scales like 1/n; allow it alongside noise
            let tol = 5.0 * (se * se + se_ref * se_ref).sqrt() + 2.0 / n as f64 * 0.1;
            let deviation_ok = (full - full_ref).abs() <= tol;
            overlay_ok &= deviation_ok;
            overlay.push(OverlayRow { t, n, psi: full, stderr: se, deviation_ok });
        }
    }

    let all_bounds_ok = b8.iter().all(|r| r.ok) && band.ok && overlay_ok;
    LdpReport {
        s: s_check,
        gamma,
        i_gamma,
        kappa_hat: kappa,
        b8,
        band,
        overlay,
        overlay_ok,
        all_bounds_ok,
    }
}

// ---------------------------------------------------------------------------
// Im Γ tightness across η
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct TightnessRow {
    pub eta: f64,
    pub xi_alpha: f64,
    pub xi_beta: f64,
    pub ratio: f64,
    /// fraction of the pool with Im Γ below 10·η (collapse diagnostic)
    pub frac_collapsed: f64,
    pub median_im: f64,
}

/// ξ(α;η)/ξ(β;η) per η, plus the mass of Im Γ collapsing toward zero. In
/// ac regimes the ratio stabilizes as η ↓ 0; in localized regimes the mass
/// of Im Γ drains to the η scale.
#[allow(clippy::too_many_arguments)]
pub fn tightness_diagnostic(
    model: &DisorderModel,
    k: u32,
    e: f64,
    etas: &[f64],
    alpha: f64,
    beta: f64,
    pool_size: usize,
    sweeps: usize,
    seed: &RealizationSeed,
) -> Vec<TightnessRow> {
    etas.iter()
        .enumerate()
        .map(|(i, &eta)| {
            let pool = pool_equilibrate(
                model,
                k,
                ComplexEnergy::new(e, eta),
                pool_size,
                sweeps,
                &seed.child(i as u64),
            );
            let ims = pool.im_values();
            let xi_alpha = percentile_xi(&ims, alpha);
            let xi_beta = percentile_xi(&ims, beta);
            let collapsed = ims.iter().filter(|&&v| v < 10.0 * eta).count() as f64
                / ims.len() as f64;
            TightnessRow {
                eta,
                xi_alpha,
                xi_beta,
                ratio: xi_alpha / xi_beta,
                frac_collapsed: collapsed,
                median_im: stats::median(&ims),
            }
        })
        .collect()
}
