//! Two-site Krein reduction. Restricting the resolvent to sites {x, y}
//! gives a 2×2 matrix whose dependence on (V(x), V(y)) is through the
//! diagonal only; the off-diagonal coupling
//!
//!   A(x,y;ζ) = G(x,y) / (G(x,x)G(y,y) − G(x,y)G(y,x))
//!
//! equals the Green function G^{T_{x,y}}(x₋,y₋;ζ) between the parents in the
//! doubly punctured tree (for non-adjacent, non-ancestral pairs). Both
//! routes are computed and required to agree.

use super::oracle::{dense_green_oracle, dense_green_punctured};
use super::{ComplexEnergy, FiniteTreeRealization, GreensError};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy)]
pub struct KreinOffdiag {
    /// Route (i): off-diagonal coupling from the inverted 2×2 restricted
    /// Green matrix.
    pub two_site: Complex64,
    /// Route (ii): G^{T_{x,y}}(x₋,y₋;ζ); `None` when x₋ or y₋ is undefined
    /// (root or adjacent/ancestral geometry).
    pub punctured: Option<Complex64>,
    pub degenerate: Option<&'static str>,
}

impl KreinOffdiag {
    pub fn rel_discrepancy(&self) -> Option<f64> {
        self.punctured.map(|p| {
            let scale = self.two_site.norm().max(p.norm()).max(1e-30);
            (self.two_site - p).norm() / scale
        })
    }
}

pub fn krein_offdiag(
    tree: &FiniteTreeRealization,
    zeta: ComplexEnergy,
    x: u32,
    y: u32,
) -> Result<KreinOffdiag, GreensError> {
    assert_ne!(x, y, "two-site reduction needs distinct sites");
    let table = dense_green_oracle(tree, zeta, &[(x, x), (x, y), (y, x), (y, y)])?;
    let g_xx = table.get(x, x).unwrap();
    let g_yy = table.get(y, y).unwrap();
    let g_xy = table.get(x, y).unwrap();
    let g_yx = table.get(y, x).unwrap();
    let two_site = g_xy / (g_xx * g_yy - g_xy * g_yx);

    let geom = &tree.geometry;
    let degenerate = if x == 0 || y == 0 {
        Some("root has no backward neighbor")
    } else if geom.parent(x) == Some(y) || geom.parent(y) == Some(x) {
        Some("adjacent sites: backward neighbor removed")
    } else if geom.is_ancestor(x, y) || geom.is_ancestor(y, x) {
        Some("ancestral pair: backward neighbors separate")
    } else {
        None
    };
    if degenerate.is_some() {
        return Ok(KreinOffdiag { two_site, punctured: None, degenerate });
    }

    let px = geom.parent(x).unwrap();
    let py = geom.parent(y).unwrap();
    let punct = dense_green_punctured(tree, zeta, &[x, y], &[(px, py)])?;
    let punctured = punct.get(px, py).unwrap();
    let result = KreinOffdiag { two_site, punctured: Some(punctured), degenerate: None };
    if let Some(rel) = result.rel_discrepancy() {
        if rel > 1e-9 && (two_site.norm().max(punctured.norm())) > 1e-14 {
            return Err(GreensError::KreinMismatch { ratio: two_site, punctured, rel });
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::DisorderModel;
    use crate::greens::TreeGeometry;
    use crate::seed::RealizationSeed;

    #[test]
    fn two_site_chain_coupling_is_minus_one() {
        // 2-site chain (K = 1): the coupling equals −1 independently of the
        // potentials and ζ
        let geometry = TreeGeometry::chain(2);
        let tree = FiniteTreeRealization::from_potentials(geometry, vec![0.3, -0.9]);
        let zeta = ComplexEnergy::new(0.2, 0.7);
        let k = krein_offdiag(&tree, zeta, 0, 1).unwrap();
        assert!((k.two_site - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        assert!(k.punctured.is_none());
        assert!(k.degenerate.is_some());
    }

    #[test]
    fn sibling_leaves_routes_agree() {
        let geometry = TreeGeometry::rooted(2, 3);
        let model = DisorderModel::gaussian(0.0, 1.0, 0.7).unwrap();
        for trial in 0..20u64 {
            let seed = RealizationSeed::with_path(33, &[trial]);
            let tree = FiniteTreeRealization::sample(geometry.clone(), &model, &seed);
            let zeta = ComplexEnergy::new(0.4, 1.0);
            let a = geometry.sphere(2).start;
            let k = krein_offdiag(&tree, zeta, a, a + 1).unwrap();
            assert!(k.rel_discrepancy().unwrap() <= 1e-9);
        }
    }

    #[test]
    fn cross_subtree_pairs_agree() {
        let geometry = TreeGeometry::rooted(2, 4);
        let model = DisorderModel::cauchy(0.0, 1.0, 0.5).unwrap();
        let seed = RealizationSeed::with_path(34, &[5]);
        let tree = FiniteTreeRealization::sample(geometry.clone(), &model, &seed);
        let zeta = ComplexEnergy::new(-0.3, 0.2);
        let s3 = geometry.sphere(3);
        // leaves under different depth-1 subtrees
        let x = s3.start;
        let y = s3.end - 1;
        let k = krein_offdiag(&tree, zeta, x, y).unwrap();
        assert!(k.rel_discrepancy().unwrap() <= 1e-9);
    }

    #[test]
    fn disconnected_components_give_zero_coupling() {
        // ambient graph: the tree with the root removed; x and y in the two
        // disjoint depth-1 subtrees. All cross entries vanish, so the ratio
        // and the doubly punctured Green function are both exactly zero.
        let geometry = TreeGeometry::rooted(2, 3);
        let model = DisorderModel::uniform_symmetric(1.0).unwrap();
        let seed = RealizationSeed::with_path(35, &[1]);
        let tree = FiniteTreeRealization::sample(geometry.clone(), &model, &seed);
        let zeta = ComplexEnergy::new(0.1, 0.4);
        let s2 = geometry.sphere(2);
        let x = s2.start; // below child 1 of the root
        let y = s2.end - 1; // below child 2 of the root
        let (px, py) = (geometry.parent(x).unwrap(), geometry.parent(y).unwrap());
        let forest = dense_green_punctured(
            &tree,
            zeta,
            &[0],
            &[(x, x), (y, y), (x, y), (y, x)],
        )
        .unwrap();
        let g_xy = forest.get(x, y).unwrap();
        assert_eq!(g_xy, Complex64::default());
        let ratio = g_xy
            / (forest.get(x, x).unwrap() * forest.get(y, y).unwrap()
                - g_xy * forest.get(y, x).unwrap());
        assert_eq!(ratio, Complex64::default());
        let punctured = dense_green_punctured(&tree, zeta, &[0, x, y], &[(px, py)]).unwrap();
        assert_eq!(punctured.get(px, py).unwrap(), Complex64::default());
    }
}
