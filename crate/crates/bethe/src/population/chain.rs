//! Root-to-depth-n chains of forward Green functions.
//!
//! The chain is generated backward: the deepest value is drawn from the
//! pool, and each step toward the root combines it with K−1 fresh pool
//! draws and a fresh potential. The product of the returned (root-first)
//! sequence is distributed like G(0,x_n;ζ), and every partial product like
//! G(0,x_m;ζ).

use super::pool::GammaPool;
use crate::disorder::DisorderModel;
use num_complex::Complex64;
use rand::Rng;

/// One chain Γ(x_0), ..., Γ(x_n), root first (n+1 values).
pub fn sample_gamma_chain<R: Rng + ?Sized>(
    pool: &GammaPool,
    model: &DisorderModel,
    n: usize,
    rng: &mut R,
) -> Vec<Complex64> {
    let z = pool.zeta.as_c64();
    let mut gammas = Vec::with_capacity(n + 1);
    let mut g = pool.draw(rng);
    gammas.push(g);
    for _ in 0..n {
        let mut sum = g;
        for _ in 1..pool.k {
            sum += pool.draw(rng);
        }
        let pot = model.lambda * model.sample_one(rng);
        g = (Complex64::new(pot, 0.0) - z - sum).inv();
        gammas.push(g);
    }
    gammas.reverse();
    gammas
}

/// Cumulative log-moduli of a chain: entry m is log|∏_{j≤m} Γ(x_j)|.
pub fn chain_cumulative_logs(chain: &[Complex64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(chain.len());
    let mut acc = 0.0;
    for g in chain {
        acc += g.norm().ln();
        cum.push(acc);
    }
    cum
}

/// A batch of chains stored as cumulative log-moduli (chains × (n+1)).
#[derive(Debug, Clone)]
pub struct ChainSet {
    pub n: usize,
    pub cumulative: Vec<Vec<f64>>,
}

impl ChainSet {
    pub fn generate<R: Rng + ?Sized>(
        pool: &GammaPool,
        model: &DisorderModel,
        n: usize,
        chains: usize,
        rng: &mut R,
    ) -> Self {
        let cumulative = (0..chains)
            .map(|_| chain_cumulative_logs(&sample_gamma_chain(pool, model, n, rng)))
            .collect();
        Self { n, cumulative }
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Per-chain decay rates: log|∏ Γ| at full length per chain factor.
    pub fn rates(&self) -> Vec<f64> {
        self.cumulative.iter().map(|c| c[self.n] / (self.n + 1) as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::DisorderModel;
    use crate::greens::{free_gamma, ComplexEnergy, FiniteTreeRealization, TreeGeometry, TreePasses};
    use crate::population::{estimate_lyapunov, pool_equilibrate};
    use crate::seed::RealizationSeed;

    fn seed() -> RealizationSeed {
        RealizationSeed::with_path(202, &[1])
    }

    #[test]
    fn free_chain_is_deterministic() {
        let model = DisorderModel::uniform_symmetric(0.0).unwrap();
        let zeta = ComplexEnergy::new(0.4, 0.5);
        let pool = pool_equilibrate(&model, 2, zeta, 64, 60, &seed());
        let mut rng = seed().child(1).rng();
        let chain = sample_gamma_chain(&pool, &model, 12, &mut rng);
        let g0 = free_gamma(2, zeta);
        for g in &chain {
            assert!((g - g0).norm() < 1e-7);
        }
        let cum = chain_cumulative_logs(&chain);
        assert!((cum[12] - 13.0 * g0.norm().ln()).abs() < 1e-6);
    }

    /// On a finite tree the forward gammas along a root path satisfy the
    /// chain update with the sibling gammas in place of pool draws, so the
    /// two factorizations coincide identically.
    #[test]
    fn chain_update_matches_truncated_recursion() {
        let geometry = TreeGeometry::rooted(2, 5);
        let model = DisorderModel::cauchy(0.0, 1.0, 0.4).unwrap();
        let tree = FiniteTreeRealization::sample(geometry.clone(), &model, &seed());
        let zeta = ComplexEnergy::new(0.2, 0.3);
        let passes = TreePasses::new(&tree, zeta);
        let leaf = geometry.sphere(4).start + 3;
        let path = geometry.path_from_root(leaf);
        let z = zeta.as_c64();
        for w in path.windows(2) {
            let (u, child_on_path) = (w[0], w[1]);
            let mut sum = Complex64::default();
            for c in geometry.children(u) {
                sum += passes.forward[c as usize];
            }
            let rebuilt = (Complex64::new(tree.potentials[u as usize], 0.0) - z - sum).inv();
            assert!((rebuilt - passes.forward[u as usize]).norm() < 1e-12);
            let _ = child_on_path;
        }
    }

    /// Law of large numbers along the chain: the mean per-step log-modulus
    /// reproduces −L̂ from the pool.
    #[test]
    fn chain_rate_matches_pool_lyapunov() {
        let model = DisorderModel::cauchy(0.0, 1.0, 0.3).unwrap();
        let zeta = ComplexEnergy::new(0.0, 1e-3);
        let pool = pool_equilibrate(&model, 2, zeta, 10_000, 60, &seed());
        let (l, _) = estimate_lyapunov(&pool);
        let mut rng = seed().child(9).rng();
        let set = ChainSet::generate(&pool, &model, 50, 800, &mut rng);
        let rates = set.rates();
        let mean = crate::stats::mean(&rates);
        let se = crate::stats::stderr_mean(&rates);
        let (_, pool_se) = (l, estimate_lyapunov(&pool).1);
        let combined = (se * se + pool_se * pool_se).sqrt();
        assert!((mean - (-l)).abs() <= 3.0 * combined, "mean rate {mean} vs -L {} (se {combined})", -l);
    }
}
