//! Exact complex Green functions on finite truncated trees.
//!
//! The truncation keeps the ball `B_R = {x : dist(0,x) < R}` and imposes the
//! empty forward sum at the leaves, so [`truncated_gamma`] is the exact Green
//! function of the restricted operator `H^{(R)}`, not an approximation of a
//! different object. A dense linear-algebra oracle ([`dense_green_oracle`])
//! provides the independent cross-check for every identity the recursion is
//! supposed to satisfy.

mod krein;
mod oracle;
mod recursion;

pub use krein::{krein_offdiag, KreinOffdiag};
pub use oracle::{dense_green_oracle, dense_green_punctured, root_row_and_diagonal, GreenTable, DENSE_NODE_CAP};
pub use recursion::{path_green, self_energy, truncated_gamma, TreePasses};

use crate::disorder::DisorderModel;
use crate::seed::RealizationSeed;
use num_complex::Complex64;
use thiserror::Error;

/// Spectral parameter ζ = E + iη. All tree computations require η > 0;
/// η = 0 is admitted only by [`free_gamma`], which takes the limit branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEnergy {
    pub e: f64,
    pub eta: f64,
}

impl ComplexEnergy {
    pub fn new(e: f64, eta: f64) -> Self {
        assert!(eta > 0.0, "spectral parameter needs Im ζ > 0, got eta = {eta}");
        Self { e, eta }
    }

    /// Boundary parameter E + i0 for closed-form limits.
    pub fn boundary(e: f64) -> Self {
        Self { e, eta: 0.0 }
    }

    pub fn as_c64(&self) -> Complex64 {
        Complex64::new(self.e, self.eta)
    }
}

#[derive(Debug, Error)]
pub enum GreensError {
    #[error("tree has {nodes} vertices, dense oracle cap is {cap}")]
    DenseTooLarge { nodes: usize, cap: usize },
    #[error("vertex {v} is outside the tree (node count {nodes})")]
    BadVertex { v: u32, nodes: usize },
    #[error("vertex {v} was removed from the subgraph")]
    RemovedVertex { v: u32 },
    #[error("the two Krein routes disagree: ratio {ratio}, punctured {punctured}, rel {rel}")]
    KreinMismatch { ratio: Complex64, punctured: Complex64, rel: f64 },
}

/// Regular rooted tree ball `B_R`: levels `0..depth`, every interior vertex
/// with `k` forward children. `root_degree` is `k` for the rooted tree and
/// `k + 1` for the ball of the fully regular tree. `k = 1` (a chain) is
/// admitted for degenerate test geometries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeGeometry {
    pub k: u32,
    pub depth: u32,
    pub root_degree: u32,
    level_offsets: Vec<usize>,
}

impl TreeGeometry {
    pub fn rooted(k: u32, depth: u32) -> Self {
        Self::with_root_degree(k, depth, k)
    }

    /// Ball of the fully regular tree (root has k+1 neighbors).
    pub fn full(k: u32, depth: u32) -> Self {
        Self::with_root_degree(k, depth, k + 1)
    }

    /// Degenerate chain geometry (k = 1).
    pub fn chain(len: u32) -> Self {
        Self::with_root_degree(1, len, 1)
    }

    fn with_root_degree(k: u32, depth: u32, root_degree: u32) -> Self {
        assert!(k >= 1, "branching number must be >= 1");
        assert!(depth >= 1, "depth must be >= 1");
        let mut level_offsets = Vec::with_capacity(depth as usize + 1);
        let mut offset = 0usize;
        let mut level_count = 1usize;
        for level in 0..depth {
            level_offsets.push(offset);
            offset = offset
                .checked_add(level_count)
                .expect("node count overflows usize");
            assert!(offset <= (1 << 31), "tree too large: {offset} vertices");
            level_count = if level == 0 {
                root_degree as usize
            } else {
                level_count * k as usize
            };
        }
        level_offsets.push(offset);
        Self { k, depth, root_degree, level_offsets }
    }

    pub fn node_count(&self) -> usize {
        *self.level_offsets.last().unwrap()
    }

    pub fn level_count(&self, level: u32) -> usize {
        self.level_offsets[level as usize + 1] - self.level_offsets[level as usize]
    }

    pub fn level_offset(&self, level: u32) -> usize {
        self.level_offsets[level as usize]
    }

    pub fn level_of(&self, v: u32) -> u32 {
        debug_assert!((v as usize) < self.node_count());
        // levels are few; linear scan is fine
        let mut level = 0;
        while self.level_offsets[level + 1] <= v as usize {
            level += 1;
        }
        level as u32
    }

    pub fn is_leaf(&self, v: u32) -> bool {
        self.level_of(v) == self.depth - 1
    }

    /// Vertex ids of the sphere S_n (distance n from the root).
    pub fn sphere(&self, n: u32) -> std::ops::Range<u32> {
        assert!(n < self.depth, "sphere radius {n} outside depth {}", self.depth);
        self.level_offsets[n as usize] as u32..self.level_offsets[n as usize + 1] as u32
    }

    /// Forward children of `v`; empty for leaves of the ball.
    pub fn children(&self, v: u32) -> std::ops::Range<u32> {
        let level = self.level_of(v);
        if level + 1 >= self.depth {
            return 0..0;
        }
        if v == 0 {
            let start = self.level_offsets[1] as u32;
            return start..start + self.root_degree;
        }
        let j = v as usize - self.level_offsets[level as usize];
        let start = self.level_offsets[level as usize + 1] + j * self.k as usize;
        start as u32..(start + self.k as usize) as u32
    }

    pub fn parent(&self, v: u32) -> Option<u32> {
        if v == 0 {
            return None;
        }
        let level = self.level_of(v);
        let j = v as usize - self.level_offsets[level as usize];
        if level == 1 {
            Some(0)
        } else {
            Some((self.level_offsets[level as usize - 1] + j / self.k as usize) as u32)
        }
    }

    /// Root-to-`v` path, inclusive on both ends.
    pub fn path_from_root(&self, v: u32) -> Vec<u32> {
        let mut path = vec![v];
        let mut cur = v;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Vertex reached from the root by the child-index digits `steps`.
    pub fn vertex_at(&self, steps: &[u32]) -> u32 {
        let mut v = 0u32;
        for &s in steps {
            let ch = self.children(v);
            assert!(s < ch.end - ch.start, "child index {s} out of range");
            v = ch.start + s;
        }
        v
    }

    /// True when `a` lies on the root path of `b` (strictly above).
    pub fn is_ancestor(&self, a: u32, b: u32) -> bool {
        if a == b {
            return false;
        }
        let (la, lb) = (self.level_of(a), self.level_of(b));
        if la >= lb {
            return false;
        }
        let mut cur = b;
        for _ in 0..(lb - la) {
            cur = self.parent(cur).unwrap();
        }
        cur == a
    }
}

/// One realization of the scaled potential λV on a finite tree ball,
/// regenerable bit-identically from its seed.
#[derive(Debug, Clone)]
pub struct FiniteTreeRealization {
    pub geometry: TreeGeometry,
    /// λ·V(x) per vertex, in vertex-id order.
    pub potentials: Vec<f64>,
    pub seed: Option<RealizationSeed>,
}

impl FiniteTreeRealization {
    pub fn sample(geometry: TreeGeometry, model: &DisorderModel, seed: &RealizationSeed) -> Self {
        let n = geometry.node_count();
        let mut rng = seed.rng();
        let potentials = (0..n).map(|_| model.lambda * model.sample_one(&mut rng)).collect();
        Self { geometry, potentials, seed: Some(seed.clone()) }
    }

    /// λ = 0: the free operator on the ball.
    pub fn free(geometry: TreeGeometry) -> Self {
        let n = geometry.node_count();
        Self { geometry, potentials: vec![0.0; n], seed: None }
    }

    pub fn from_potentials(geometry: TreeGeometry, potentials: Vec<f64>) -> Self {
        assert_eq!(potentials.len(), geometry.node_count());
        Self { geometry, potentials, seed: None }
    }
}

/// Green function of the adjacency operator at the root: the root of
/// `K Γ² + ζ Γ + 1 = 0` with `Im Γ > 0`. For η = 0 the branch is the η ↓ 0
/// limit: inside `|E| ≤ 2√K` the closed Herglotz boundary value, outside it
/// the real root of smaller modulus.
pub fn free_gamma(k: u32, zeta: ComplexEnergy) -> Complex64 {
    let kf = k as f64;
    if zeta.eta == 0.0 {
        let e = zeta.e;
        let edge = 2.0 * kf.sqrt();
        if e.abs() <= edge {
            // (4K − E²) can round negative exactly on the band edge
            return Complex64::new(-e / (2.0 * kf), (4.0 * kf - e * e).max(0.0).sqrt() / (2.0 * kf));
        }
        let root = (-e + e.signum() * (e * e - 4.0 * kf).sqrt()) / (2.0 * kf);
        return Complex64::new(root, 0.0);
    }
    let z = zeta.as_c64();
    let disc = (z * z - 4.0 * kf).sqrt();
    let r1 = (-z + disc) / (2.0 * kf);
    let r2 = (-z - disc) / (2.0 * kf);
    let gamma = if r1.im > 0.0 { r1 } else { r2 };
    // one root always lies in the upper half-plane for Im ζ > 0
    assert!(gamma.im > 0.0, "no Herglotz root at zeta = {z}");
    gamma
}

/// Boundary values within 1e-6 of |E| = 2√K sit on the branch tangency and
/// should be treated as ambiguous.
pub fn edge_ambiguous(k: u32, e: f64) -> bool {
    (e.abs() - 2.0 * (k as f64).sqrt()).abs() < 1e-6
}
