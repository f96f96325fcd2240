//! Identity checks pitting the linear-time tree recursion against the dense
//! resolvent oracle over randomized realizations.

use bethe::disorder::DisorderModel;
use bethe::greens::{
    dense_green_oracle, dense_green_punctured, krein_offdiag, path_green, truncated_gamma,
    ComplexEnergy, FiniteTreeRealization, TreeGeometry, TreePasses,
};
use bethe::seed::RealizationSeed;
use num_complex::Complex64;
use rand::Rng;

fn models() -> Vec<DisorderModel> {
    vec![
        DisorderModel::cauchy(0.0, 1.0, 0.6).unwrap(),
        DisorderModel::uniform_symmetric(0.9).unwrap(),
    ]
}

fn random_case(trial: u64) -> (FiniteTreeRealization, ComplexEnergy) {
    let seed = RealizationSeed::with_path(7_000, &[trial]);
    let mut rng = seed.rng();
    let k = if rng.gen_bool(0.5) { 2 } else { 3 };
    let depth = rng.gen_range(2..=if k == 2 { 6 } else { 5 });
    let model = &models()[rng.gen_range(0..2)];
    let geometry = TreeGeometry::rooted(k, depth);
    let tree = FiniteTreeRealization::sample(geometry, model, &seed.child(1));
    let zeta = ComplexEnergy::new(rng.gen_range(-3.0..3.0), rng.gen_range(1e-3..1.0));
    (tree, zeta)
}

/// Recursion–oracle equivalence and the path-product factorization, 100
/// random realizations, 1e-10 relative.
#[test]
fn recursion_matches_dense_oracle() {
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let (tree, zeta) = random_case(trial);
        let n = tree.geometry.node_count() as u32;
        let pairs: Vec<(u32, u32)> = (0..n).map(|x| (x, 0)).collect();
        let table = dense_green_oracle(&tree, zeta, &pairs).unwrap();

        let g_root = truncated_gamma(&tree, zeta);
        let oracle_root = table.get(0, 0).unwrap();
        worst = worst.max((g_root - oracle_root).norm() / oracle_root.norm());

        let passes = TreePasses::new(&tree, zeta);
        for x in 0..n {
            // the resolvent off-diagonal carries a (−1)^dist phase relative
            // to the forward-gamma product
            let phase = if tree.geometry.level_of(x) % 2 == 1 { -1.0 } else { 1.0 };
            let via_path = phase * passes.root_to(&tree, x);
            let oracle = table.get(x, 0).unwrap();
            let scale = oracle.norm().max(1e-30);
            worst = worst.max((via_path - oracle).norm() / scale);
        }
    }
    assert!(worst <= 1e-10, "max relative discrepancy {worst}");
}

/// Sum rule Σ_x |G(0,x)|² = Im G(0,0)/η, exact on finite trees.
#[test]
fn sum_rule_exact() {
    for trial in 0..100 {
        let (tree, zeta) = random_case(1_000 + trial);
        let passes = TreePasses::new(&tree, zeta);
        let residual = passes.sum_rule_residual(&tree);
        let cap = 1e-9 / (zeta.eta * zeta.eta);
        assert!(residual <= cap, "trial {trial}: residual {residual} vs {cap}");
    }
}

/// Herglotz property and the resolvent bound |G| ≤ 1/η on every produced
/// entry, randomized.
#[test]
fn herglotz_and_resolvent_bounds() {
    for trial in 0..1000 {
        let (tree, zeta) = random_case(2_000 + trial);
        let passes = TreePasses::new(&tree, zeta);
        let bound = 1.0 / zeta.eta + 1e-9;
        for v in 0..tree.geometry.node_count() as u32 {
            let fwd = passes.forward[v as usize];
            assert!(fwd.im > 0.0, "forward gamma not Herglotz at {v}");
            assert!(fwd.norm() <= bound);
            let diag = passes.diagonal(v);
            assert!(diag.im > 0.0, "diagonal not Herglotz at {v}");
            assert!(diag.norm() <= bound);
            assert!(passes.root_to(&tree, v).norm() <= bound);
        }
    }
}

/// Three-point factorization G(x,y) = G^{T_u}(x,u₋)·G(u,u)·G^{T_u}(u₊,y)
/// whenever removing u separates x from y.
#[test]
fn three_point_factorization() {
    let mut checked = 0;
    for trial in 0..200 {
        if checked >= 50 {
            break;
        }
        let (tree, zeta) = random_case(3_000 + trial);
        let g = &tree.geometry;
        if g.depth < 4 {
            continue;
        }
        // x = root, u interior on the path to a deep vertex y
        let y = g.sphere(g.depth - 1).start + (trial as u32 % g.level_count(g.depth - 1) as u32);
        let path = g.path_from_root(y);
        let u = path[path.len() / 2];
        let u_minus = g.parent(u).unwrap();
        let u_plus = path[path.len() / 2 + 1];

        let full = dense_green_oracle(&tree, zeta, &[(0, y), (u, u)]).unwrap();
        let punct = dense_green_punctured(&tree, zeta, &[u], &[(0, u_minus), (u_plus, y)]).unwrap();
        let lhs = full.get(0, y).unwrap();
        let rhs = punct.get(0, u_minus).unwrap()
            * full.get(u, u).unwrap()
            * punct.get(u_plus, y).unwrap();
        let scale = lhs.norm().max(rhs.norm()).max(1e-30);
        assert!((lhs - rhs).norm() / scale <= 1e-9, "trial {trial}: {lhs} vs {rhs}");
        checked += 1;
    }
    assert!(checked >= 50);
}

/// Both Krein routes agree on random sphere pairs under random events.
#[test]
fn krein_routes_agree_random() {
    let mut checked = 0;
    for trial in 0..200 {
        if checked >= 50 {
            break;
        }
        let (tree, zeta) = random_case(4_000 + trial);
        let g = tree.geometry.clone();
        if g.depth < 3 {
            continue;
        }
        let sphere = g.sphere(g.depth - 1);
        let x = sphere.start;
        let y = sphere.end - 1;
        if x == y || g.parent(x) == g.parent(y) && false {
            continue;
        }
        let k = krein_offdiag(&tree, zeta, x, y).unwrap();
        if let Some(rel) = k.rel_discrepancy() {
            assert!(rel <= 1e-9, "trial {trial}: rel {rel}");
            checked += 1;
        }
    }
    assert!(checked >= 50);
}

/// Iterated imaginary-part recursion: on a finite ball with zero boundary,
/// Im Γ(0) dominates Σ_{x∈S_n} |G(0,x)|² Σ_{y child of x} Im Γ(y) (the η
/// terms dropped make it an inequality; with them it is an identity).
#[test]
fn imaginary_part_iteration_inequality() {
    for trial in 0..100 {
        let (tree, zeta) = random_case(5_000 + trial);
        let g = tree.geometry.clone();
        if g.depth < 3 {
            continue;
        }
        let passes = TreePasses::new(&tree, zeta);
        let root_im = passes.forward[0].im;
        for n in 1..g.depth - 1 {
            let mut rhs = 0.0;
            for x in g.sphere(n) {
                let gx: Complex64 = passes.root_to(&tree, x);
                let child_im: f64 = g.children(x).map(|c| passes.forward[c as usize].im).sum();
                rhs += gx.norm_sqr() * child_im;
            }
            assert!(
                root_im >= rhs - 1e-9 * root_im.abs().max(1e-30),
                "trial {trial} n={n}: Im Γ(0) = {root_im} < {rhs}"
            );
        }
    }
}
