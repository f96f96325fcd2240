//! Dense linear-algebra oracle: assemble H on the ball as a matrix and solve
//! (H − ζ)G = I columns directly. Independent of the tree recursion, so it
//! serves as the cross-check for every recursion-built identity.

use super::{ComplexEnergy, FiniteTreeRealization, GreensError};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::HashMap;

/// Node cap for dense feasibility.
pub const DENSE_NODE_CAP: usize = 10_000;

/// Partial table of Green-function entries at one ζ.
#[derive(Debug, Clone)]
pub struct GreenTable {
    pub zeta: ComplexEnergy,
    entries: HashMap<(u32, u32), Complex64>,
}

impl GreenTable {
    pub fn get(&self, x: u32, y: u32) -> Option<Complex64> {
        self.entries.get(&(x, y)).or_else(|| self.entries.get(&(y, x))).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(u32, u32), &Complex64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest |G(x,y) − G(y,x)| among stored transpose pairs.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for (&(x, y), &g) in &self.entries {
            if let Some(&h) = self.entries.get(&(y, x)) {
                worst = worst.max((g - h).norm());
            }
        }
        worst
    }
}

/// Green-function entries of the full ball for the requested pairs.
pub fn dense_green_oracle(
    tree: &FiniteTreeRealization,
    zeta: ComplexEnergy,
    pairs: &[(u32, u32)],
) -> Result<GreenTable, GreensError> {
    dense_green_punctured(tree, zeta, &[], pairs)
}

/// Same, on the subgraph with `removed` vertices (and their matrix rows and
/// columns) deleted. Entries across disconnected components come out as
/// exact zeros of the block-diagonal resolvent.
pub fn dense_green_punctured(
    tree: &FiniteTreeRealization,
    zeta: ComplexEnergy,
    removed: &[u32],
    pairs: &[(u32, u32)],
) -> Result<GreenTable, GreensError> {
    let g = &tree.geometry;
    let n = g.node_count();
    if n > DENSE_NODE_CAP {
        return Err(GreensError::DenseTooLarge { nodes: n, cap: DENSE_NODE_CAP });
    }
    let mut keep = vec![true; n];
    for &v in removed {
        if v as usize >= n {
            return Err(GreensError::BadVertex { v, nodes: n });
        }
        keep[v as usize] = false;
    }
    let mut dense_index = vec![usize::MAX; n];
    let mut kept = 0usize;
    for v in 0..n {
        if keep[v] {
            dense_index[v] = kept;
            kept += 1;
        }
    }
    for &(x, y) in pairs {
        for v in [x, y] {
            if v as usize >= n {
                return Err(GreensError::BadVertex { v, nodes: n });
            }
            if !keep[v as usize] {
                return Err(GreensError::RemovedVertex { v });
            }
        }
    }

    // H − ζ on the kept vertices: diagonal λV(v) − ζ, hopping 1 on kept edges
    let z = zeta.as_c64();
    let mut m = DMatrix::<Complex64>::zeros(kept, kept);
    for v in 0..n as u32 {
        if !keep[v as usize] {
            continue;
        }
        let i = dense_index[v as usize];
        m[(i, i)] = Complex64::new(tree.potentials[v as usize], 0.0) - z;
        for c in g.children(v) {
            if keep[c as usize] {
                let j = dense_index[c as usize];
                m[(i, j)] = Complex64::new(1.0, 0.0);
                m[(j, i)] = Complex64::new(1.0, 0.0);
            }
        }
    }
    let lu = m.lu();

    let mut columns: Vec<u32> = pairs.iter().map(|&(_, y)| y).collect();
    columns.sort_unstable();
    columns.dedup();
    let mut solved: HashMap<u32, nalgebra::DVector<Complex64>> = HashMap::new();
    for &y in &columns {
        let mut rhs = nalgebra::DVector::<Complex64>::zeros(kept);
        rhs[dense_index[y as usize]] = Complex64::new(1.0, 0.0);
        let sol = lu.solve(&rhs).expect("resolvent is invertible for Im ζ > 0");
        solved.insert(y, sol);
    }

    let mut entries = HashMap::with_capacity(pairs.len());
    for &(x, y) in pairs {
        let col = &solved[&y];
        entries.insert((x, y), col[dense_index[x as usize]]);
    }
    Ok(GreenTable { zeta, entries })
}

/// Convenience pair list: the root row plus the diagonal.
pub fn root_row_and_diagonal(tree: &FiniteTreeRealization) -> Vec<(u32, u32)> {
    let n = tree.geometry.node_count() as u32;
    let mut pairs: Vec<(u32, u32)> = (0..n).map(|x| (x, 0)).collect();
    pairs.extend((0..n).map(|x| (x, x)));
    pairs
}
