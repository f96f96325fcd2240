//! Classification of (E, λ) points into spectral regimes.
//!
//! Two sufficiency criteria for absolutely continuous spectrum are checked
//! with one-sided 3σ margins: the Lyapunov criterion L_λ(E) < log K, and the
//! free-energy criterion φ_λ(1;E) > −log K (the latter only for full-line
//! disorder, where the density is bounded below on compacts). The
//! complementary condition φ_λ(1;E) < −log K labels localization. Points
//! meeting no margin stay `Undetermined`; a numerical method can only
//! certify strict inequalities with margin.

mod edge;

pub use edge::{
    edge_analysis, lifshitz_check, lyapunov_interval_average, ray_sum_check, EdgeAnalysis,
    IntervalAverageRow, LifshitzRow, LifshitzTable, RaySumCheck,
};

use crate::disorder::{DisorderModel, Support};
use crate::greens::{free_gamma, ComplexEnergy};
use crate::population::{
    estimate_free_energy, lyapunov_boundary, phi1_extrapolated, FreeEnergyCurve, LyapunovBoundary,
    Phi1, DEFAULT_ETA_SEQUENCE,
};
use crate::seed::RealizationSeed;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhaseError {
    #[error("operation requires bounded support [-1, 1], model has {0:?}")]
    UnboundedSupport(Support),
    #[error("ray-sum parameter alpha = {alpha} outside (0, {max}]")]
    BadRayAlpha { alpha: f64, max: f64 },
}

/// Free Lyapunov exponent L₀(E) = −log|Γ₀(E+i0)|: log √K inside the
/// spectrum of T, between log √K and log K for 2√K < |E| < K+1, and at
/// least log K beyond.
pub fn free_lyapunov(k: u32, e: f64) -> f64 {
    -free_gamma(k, ComplexEnergy::boundary(e)).norm().ln()
}

/// Almost-sure spectrum σ(T) + λ·supp ρ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumSet {
    FullLine,
    Interval { lo: f64, hi: f64 },
}

pub fn spectrum_interval(model: &DisorderModel, k: u32) -> SpectrumSet {
    let edge = 2.0 * (k as f64).sqrt();
    if model.lambda == 0.0 {
        return SpectrumSet::Interval { lo: -edge, hi: edge };
    }
    match model.support {
        Support::FullLine => SpectrumSet::FullLine,
        Support::Interval(a, b) => SpectrumSet::Interval {
            lo: -edge + model.lambda * a,
            hi: edge + model.lambda * b,
        },
    }
}

/// Monte Carlo budgets for pointwise classification.
#[derive(Debug, Clone)]
pub struct Budgets {
    pub pool_size: usize,
    pub sweeps: usize,
    pub chains: usize,
    pub chain_len: usize,
    pub etas: Vec<f64>,
    pub s_grid: Vec<f64>,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            pool_size: 20_000,
            sweeps: 120,
            chains: 1500,
            chain_len: 48,
            etas: DEFAULT_ETA_SEQUENCE.to_vec(),
            s_grid: vec![-0.25, -0.1, -0.05, 0.0, 0.05, 0.1, 0.25, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseLabel {
    AcLyapunov,
    AcPhi1,
    LocalizedPhi1,
    Undetermined,
}

impl PhaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseLabel::AcLyapunov => "ac_lyapunov",
            PhaseLabel::AcPhi1 => "ac_phi1",
            PhaseLabel::LocalizedPhi1 => "localized_phi1",
            PhaseLabel::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhasePoint {
    pub e: f64,
    pub lambda: f64,
    pub l: f64,
    pub l_stderr: f64,
    pub phi1: Option<Phi1>,
    pub label: PhaseLabel,
    /// (log K − L̂)/σ: the ac label needs > 3
    pub margin_ac_lyapunov: f64,
    /// (φ₁ + log K)/spread, only when the φ(1) criterion applies
    pub margin_ac_phi1: Option<f64>,
    /// (−log K − φ₁)/spread
    pub margin_localized: Option<f64>,
    pub flags: Vec<String>,
}

const MARGIN_SIGMAS: f64 = 3.0;

fn one_sided_margin(gap: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        gap / sigma
    } else if gap > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

/// Classify one (E, λ) point. The Lyapunov estimate always runs; the φ(1)
/// extrapolation runs for λ > 0 (for the localization label on any model,
/// and for the ac label only when the density has full-line support).
pub fn classify_point(
    model: &DisorderModel,
    k: u32,
    e: f64,
    budgets: &Budgets,
    seed: &RealizationSeed,
) -> PhasePoint {
    let log_k = (k as f64).ln();
    let mut flags = Vec::new();

    if model.lambda == 0.0 {
        let l = free_lyapunov(k, e);
        if crate::greens::edge_ambiguous(k, e) {
            flags.push("edge_ambiguous".to_string());
        }
        let margin = one_sided_margin(log_k - l, 0.0);
        let label = if margin > MARGIN_SIGMAS { PhaseLabel::AcLyapunov } else { PhaseLabel::Undetermined };
        return PhasePoint {
            e,
            lambda: 0.0,
            l,
            l_stderr: 0.0,
            phi1: None,
            label,
            margin_ac_lyapunov: margin,
            margin_ac_phi1: None,
            margin_localized: None,
            flags,
        };
    }

    let lb: LyapunovBoundary =
        lyapunov_boundary(model, k, e, &budgets.etas, budgets.pool_size, budgets.sweeps, &seed.child(0));
    if !lb.converged {
        flags.push("lyapunov_eta_not_converged".to_string());
    }
    if !lb.equilibrated {
        flags.push("pool_not_equilibrated".to_string());
    }

    let curve = phi_curve(model, k, e, budgets, seed);
    for (i, &f) in curve.flagged.iter().enumerate() {
        if f {
            flags.push(format!("phi_heavy_tail_s={}", curve.s_grid[i]));
        }
    }
    let phi1 = phi1_extrapolated(&curve);

    let margin_ac_lyapunov = one_sided_margin(log_k - lb.l, lb.stderr);
    let margin_ac_phi1 = model
        .assumption_e
        .then(|| one_sided_margin(phi1.value + log_k, phi1.spread));
    let margin_localized = Some(one_sided_margin(-log_k - phi1.value, phi1.spread));

    let label = if margin_ac_lyapunov > MARGIN_SIGMAS {
        PhaseLabel::AcLyapunov
    } else if margin_ac_phi1.is_some_and(|m| m > MARGIN_SIGMAS) {
        PhaseLabel::AcPhi1
    } else if margin_localized.is_some_and(|m| m > MARGIN_SIGMAS) {
        PhaseLabel::LocalizedPhi1
    } else {
        PhaseLabel::Undetermined
    };

    PhasePoint {
        e,
        lambda: model.lambda,
        l: lb.l,
        l_stderr: lb.stderr,
        phi1: Some(phi1),
        label,
        margin_ac_lyapunov,
        margin_ac_phi1,
        margin_localized,
        flags,
    }
}

fn phi_curve(
    model: &DisorderModel,
    k: u32,
    e: f64,
    budgets: &Budgets,
    seed: &RealizationSeed,
) -> FreeEnergyCurve {
    let eta_min = budgets.etas.iter().cloned().fold(f64::INFINITY, f64::min);
    let zeta = ComplexEnergy::new(e, eta_min);
    let pool = crate::population::pool_equilibrate(model, k, zeta, budgets.pool_size, budgets.sweeps, &seed.child(1));
    let s_grid: Vec<f64> = budgets
        .s_grid
        .iter()
        .cloned()
        .filter(|&s| s >= -model.moment_exponent)
        .collect();
    estimate_free_energy(&pool, model, &s_grid, budgets.chain_len, budgets.chains, &seed.child(2))
}

#[derive(Debug, Clone)]
pub struct Provenance {
    pub master_seed: u64,
    pub k: u32,
    pub code_version: String,
}

#[derive(Debug, Clone)]
pub struct PhaseDiagram {
    pub e_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    /// row-major: index = e_index * lambda_grid.len() + lambda_index
    pub points: Vec<PhasePoint>,
    pub provenance: Provenance,
}

/// Classify the product grid. Cells are independent tasks with streams
/// derived from (master seed, grid indices); the merge is by cell index, so
/// results do not depend on the worker count or schedule.
pub fn scan_phase_diagram(
    model: &DisorderModel,
    k: u32,
    e_grid: &[f64],
    lambda_grid: &[f64],
    budgets: &Budgets,
    master_seed: u64,
) -> PhaseDiagram {
    assert!(!e_grid.is_empty() && !lambda_grid.is_empty(), "grids must be nonempty");
    let cells: Vec<(usize, usize)> = (0..e_grid.len())
        .flat_map(|ie| (0..lambda_grid.len()).map(move |il| (ie, il)))
        .collect();
    let points: Vec<PhasePoint> = cells
        .par_iter()
        .map(|&(ie, il)| {
            let cell_model = model.with_lambda(lambda_grid[il]);
            let seed = RealizationSeed::with_path(master_seed, &[ie as u64, il as u64]);
            classify_point(&cell_model, k, e_grid[ie], budgets, &seed)
        })
        .collect();
    PhaseDiagram {
        e_grid: e_grid.to_vec(),
        lambda_grid: lambda_grid.to_vec(),
        points,
        provenance: Provenance {
            master_seed,
            k,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    }
}

/// Bisect the λ = 0 boundary L₀(E) = log K on [lo, hi].
pub fn free_crossing(k: u32, lo: f64, hi: f64, tol: f64) -> f64 {
    let log_k = (k as f64).ln();
    let (mut lo, mut hi) = (lo, hi);
    assert!((free_lyapunov(k, lo) - log_k) * (free_lyapunov(k, hi) - log_k) <= 0.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (free_lyapunov(k, mid) - log_k) * (free_lyapunov(k, lo) - log_k) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
