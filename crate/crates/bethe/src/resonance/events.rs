//! Event evaluation on the sphere of a pool-fed finite ball.
//!
//! The realization lives on B_{n+2}; forward Green functions at the leaves
//! are fed from the equilibrated pool, so the sphere sites see an
//! (approximate) infinite tree rather than a hard truncation that would
//! bias Im Γ toward zero. For each sphere site the record stores the Green
//! quantities that decided each indicator, so the event logic can be
//! replayed from the record alone.

use super::config::{ResonanceConfig, ResonanceMode};
use crate::greens::{ComplexEnergy, FiniteTreeRealization, TreeGeometry, TreePasses};
use crate::population::GammaPool;
use num_complex::Complex64;
use rand::Rng;

/// Sphere sites to evaluate: every site of S_n (or of the thinned sphere
/// S_n^κ in large-deviation mode), exhaustively up to the cap, else a
/// uniform sample.
#[derive(Debug, Clone)]
pub struct SphereSites {
    pub vertices: Vec<u32>,
    pub exhaustive: bool,
    /// |S_n| (or |S_n^κ|): the weight for the symmetry identity E[N] = |S|·P(joint)
    pub sphere_size: f64,
}

pub const EXHAUSTIVE_SITE_CAP: usize = 16_384;

impl SphereSites {
    /// Thinned sites follow the first-child branch for the last n_κ steps,
    /// which keeps every pairwise last common ancestor at depth < N_κ.
    pub fn build<R: Rng + ?Sized>(
        config: &ResonanceConfig,
        geometry: &TreeGeometry,
        sample_sites: Option<usize>,
        rng: &mut R,
    ) -> Self {
        let k = config.k;
        let n = config.n;
        let n_kappa = config.n_kappa();
        let free_steps = (n - n_kappa) as usize;
        let sphere_size = (k as f64).powi(free_steps as i32);
        let exhaustive_count = (k as u64).checked_pow(free_steps as u32).map(|c| c as usize);
        let exhaustive = sample_sites.is_none()
            && exhaustive_count.is_some_and(|c| c <= EXHAUSTIVE_SITE_CAP);
        let mut digits = vec![0u32; n as usize];
        let mut vertices = Vec::new();
        if exhaustive {
            let total = exhaustive_count.unwrap();
            for mut idx in 0..total {
                for d in (0..free_steps).rev() {
                    digits[d] = (idx % k as usize) as u32;
                    idx /= k as usize;
                }
                for d in free_steps..n as usize {
                    digits[d] = 0;
                }
                vertices.push(geometry.vertex_at(&digits));
            }
        } else {
            let count = sample_sites.unwrap_or(EXHAUSTIVE_SITE_CAP);
            for _ in 0..count {
                for d in digits.iter_mut().take(free_steps) {
                    *d = rng.gen_range(0..k);
                }
                for d in free_steps..n as usize {
                    digits[d] = 0;
                }
                vertices.push(geometry.vertex_at(&digits));
            }
        }
        SphereSites { vertices, exhaustive, sphere_size }
    }
}

/// Stored quantities and indicators for the large-deviation sub-events.
#[derive(Debug, Clone)]
pub struct LdEventRecord {
    /// log|∏_{j≤k} Γ₊(j)| for k = 1..N_κ
    pub partial_plus: Vec<f64>,
    /// log|∏_{j≤k} Γ₋(j)|
    pub partial_minus: Vec<f64>,
    pub bc_plus_abs: f64,
    pub bc_minus_abs: f64,
    /// every windowed partial product stayed in the ε-band around e^{−γk}
    pub band_ok: bool,
    /// both boundary factors below b/2
    pub bc_ok: bool,
    /// L_x = band ∧ boundary
    pub l_event: bool,
    /// |G^{T_x}(x_{n_κ−1}, x_{n_κ−1})| ≤ b/2 (the R boundary condition)
    pub r_bc_abs: f64,
}

/// Per-site event record. `g_prefix_abs` is |G^{T_x}(0, x_{n−1})| in
/// Lyapunov mode and |G^{T_x}(0, x_{n_κ−1})| in large-deviation mode.
#[derive(Debug, Clone)]
pub struct EventRecord {
    pub site: u32,
    pub g_xx_abs: f64,
    pub g_prefix_abs: f64,
    pub max_im_forward: f64,
    pub xi: f64,
    pub tau: f64,
    pub extreme: bool,
    pub regular: bool,
    pub marginal: bool,
    pub ld: Option<LdEventRecord>,
}

impl EventRecord {
    /// Joint event whose count defines N.
    pub fn joint(&self) -> bool {
        match &self.ld {
            None => self.extreme && self.regular && self.marginal,
            Some(ld) => self.extreme && self.regular && ld.l_event && self.marginal,
        }
    }

    /// Replay the indicators from the stored quantities.
    pub fn recompute_joint(&self, config: &ResonanceConfig) -> bool {
        let extreme = self.g_xx_abs >= self.tau;
        let marginal = self.max_im_forward >= self.xi;
        match (&config.mode, &self.ld) {
            (ResonanceMode::Lyapunov { .. }, None) => {
                let regular = self.g_prefix_abs >= (-config.ell * config.n as f64).exp();
                extreme && regular && marginal
            }
            (ResonanceMode::LargeDeviation(p), Some(ld)) => {
                let n_kappa = config.n_kappa() as f64;
                let regular_decay = self.g_prefix_abs >= (-config.ell * n_kappa).exp()
                    && self.g_prefix_abs <= 1.0;
                let regular = regular_decay && ld.r_bc_abs <= p.b / 2.0;
                let band = band_ok(&ld.partial_plus, &ld.partial_minus, config);
                let bc = ld.bc_plus_abs <= p.b / 2.0 && ld.bc_minus_abs <= p.b / 2.0;
                extreme && regular && band && bc && marginal
            }
            _ => unreachable!("record mode mismatch"),
        }
    }
}

fn band_ok(plus: &[f64], minus: &[f64], config: &ResonanceConfig) -> bool {
    let p = match config.mode {
        ResonanceMode::LargeDeviation(p) => p,
        _ => unreachable!(),
    };
    let k_lo = (config.n_kappa() / 2).max(1) as usize;
    let k_hi = config.n_cap() as usize;
    (k_lo..=k_hi).all(|k| {
        let target = -p.gamma * k as f64;
        let tol = p.epsilon * k as f64;
        (plus[k - 1] - target).abs() <= tol && (minus[k - 1] - target).abs() <= tol
    })
}

/// Evaluate all event indicators on the given sphere sites. Leaves of the
/// ball are fed from the pool through `rng`.
pub fn evaluate_events<R: Rng + ?Sized>(
    config: &ResonanceConfig,
    tree: &FiniteTreeRealization,
    pool: &GammaPool,
    xi: f64,
    sites: &SphereSites,
    rng: &mut R,
) -> Vec<EventRecord> {
    assert_eq!(tree.geometry.depth, config.n + 2, "realization must live on B_{{n+2}}");
    assert_eq!(tree.geometry.k, config.k);
    let zeta = ComplexEnergy::new(pool.zeta.e, config.eta);
    let passes = TreePasses::with_boundary(tree, zeta, &mut || pool.draw(rng));
    sites
        .vertices
        .iter()
        .map(|&x| evaluate_site(config, tree, &passes, xi, x))
        .collect()
}

fn evaluate_site(
    config: &ResonanceConfig,
    tree: &FiniteTreeRealization,
    passes: &TreePasses,
    xi: f64,
    x: u32,
) -> EventRecord {
    let geometry = &tree.geometry;
    let n = config.n as usize;
    let g_xx_abs = passes.diagonal(x).norm();
    let max_im_forward = geometry
        .children(x)
        .map(|c| passes.forward[c as usize].im)
        .fold(f64::NEG_INFINITY, f64::max);
    let modified = passes.forward_without(tree, x); // Γ'(x_0..x_{n−1}) in T_x
    debug_assert_eq!(modified.len(), n);

    match config.mode {
        ResonanceMode::Lyapunov { .. } => {
            let g_prefix_abs = modified.iter().product::<Complex64>().norm();
            EventRecord {
                site: x,
                g_xx_abs,
                g_prefix_abs,
                max_im_forward,
                xi,
                tau: config.tau,
                extreme: g_xx_abs >= config.tau,
                regular: g_prefix_abs >= (-config.ell * config.n as f64).exp(),
                marginal: max_im_forward >= xi,
                ld: None,
            }
        }
        ResonanceMode::LargeDeviation(p) => {
            let n_kappa = config.n_kappa() as usize;
            let n_cap = config.n_cap() as usize;
            let path = geometry.path_from_root(x);
            let z = passes.zeta().as_c64();

            // |G^{T_x}(0, x_{n_κ−1})|
            let g_prefix_abs = modified[..n_kappa].iter().product::<Complex64>().norm();

            // Γ₊(j) = Γ'(x_{n−j}); cumulative logs of the partial products
            let mut partial_plus = Vec::with_capacity(n_cap);
            let mut acc = 0.0;
            for j in 1..=n_cap {
                acc += modified[n - j].norm().ln();
                partial_plus.push(acc);
            }
            let bc_plus_abs = modified[n_kappa].norm();

            // Γ₋(j): downward recursion along the segment with the parent
            // side cut at x_{n_κ−1} and the forward path vertex removed
            let mut partial_minus = Vec::with_capacity(n_cap);
            let mut gamma_minus = Complex64::default();
            let mut acc = 0.0;
            for j in 1..=n_cap {
                let v = path[n_kappa - 1 + j] as usize;
                let path_child = path[n_kappa + j] as usize;
                let side_sum = sum_children_except(tree, passes, v as u32, path_child as u32);
                let parent_term = if j == 1 { Complex64::default() } else { gamma_minus };
                gamma_minus =
                    (Complex64::new(tree.potentials[v], 0.0) - z - side_sum - parent_term).inv();
                acc += gamma_minus.norm().ln();
                partial_minus.push(acc);
            }
            let bc_minus_abs = gamma_minus.norm();

            // R boundary: diagonal of x_{n_κ−1} in T_x
            let w = path[n_kappa - 1] as usize;
            let up_term = if w == 0 { Complex64::default() } else { passes.upward[w] };
            let side_w = sum_children_except(tree, passes, w as u32, path[n_kappa]);
            let r_bc_abs = (Complex64::new(tree.potentials[w], 0.0)
                - z
                - up_term
                - side_w
                - modified[n_kappa])
                .inv()
                .norm();

            let record_ld = LdEventRecord {
                band_ok: false,
                bc_ok: bc_plus_abs <= p.b / 2.0 && bc_minus_abs <= p.b / 2.0,
                l_event: false,
                partial_plus,
                partial_minus,
                bc_plus_abs,
                bc_minus_abs,
                r_bc_abs,
            };
            let band = band_ok(&record_ld.partial_plus, &record_ld.partial_minus, config);
            let l_event = band && record_ld.bc_ok;
            let regular = g_prefix_abs >= (-config.ell * n_kappa as f64).exp()
                && g_prefix_abs <= 1.0
                && r_bc_abs <= p.b / 2.0;
            EventRecord {
                site: x,
                g_xx_abs,
                g_prefix_abs,
                max_im_forward,
                xi,
                tau: config.tau,
                extreme: g_xx_abs >= config.tau,
                regular,
                marginal: max_im_forward >= xi,
                ld: Some(LdEventRecord { band_ok: band, l_event, ..record_ld }),
            }
        }
    }
}

fn sum_children_except(
    tree: &FiniteTreeRealization,
    passes: &TreePasses,
    v: u32,
    except: u32,
) -> Complex64 {
    let mut sum = Complex64::default();
    for c in tree.geometry.children(v) {
        if c != except {
            sum += passes.forward[c as usize];
        }
    }
    sum
}
