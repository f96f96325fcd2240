//! Density of states from the resolvent: D(E) = lim_{η↓0} (1/π) E[Im G(x,x;E+iη)],
//! estimated against the equilibrated pool on the rooted tree (K forward
//! terms) and on the fully regular tree (K+1 terms).

use super::pool::pool_equilibrate;
use crate::disorder::DisorderModel;
use crate::greens::ComplexEnergy;
use crate::seed::RealizationSeed;
use crate::stats;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy)]
pub struct DosRow {
    pub e: f64,
    pub eta: f64,
    pub rooted: f64,
    pub rooted_stderr: f64,
    pub full: f64,
    pub full_stderr: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct DosPoint {
    pub e: f64,
    pub eta: f64,
    pub rooted: f64,
    pub full: f64,
    pub stderr: f64,
    /// the two smallest-η estimates differ by less than 3 combined stderr
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct DosEstimate {
    pub rows: Vec<DosRow>,
    /// smallest-η value per grid energy
    pub extrapolated: Vec<DosPoint>,
}

pub fn estimate_dos(
    model: &DisorderModel,
    k: u32,
    e_grid: &[f64],
    etas: &[f64],
    pool_size: usize,
    sweeps: usize,
    seed: &RealizationSeed,
) -> DosEstimate {
    assert!(!etas.is_empty());
    let mut sorted = etas.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert!(*sorted.last().unwrap() >= 1e-6, "smallest eta below 1e-6");
    assert!(
        sorted.windows(2).all(|w| w[0] > w[1]),
        "eta sequence must be strictly decreasing"
    );

    let mut rows = Vec::with_capacity(e_grid.len() * sorted.len());
    let mut extrapolated = Vec::with_capacity(e_grid.len());
    for (ei, &e) in e_grid.iter().enumerate() {
        let mut per_eta: Vec<DosRow> = Vec::with_capacity(sorted.len());
        for (hi, &eta) in sorted.iter().enumerate() {
            let zeta = ComplexEnergy::new(e, eta);
            let task = seed.child(ei as u64).child(hi as u64);
            let pool = pool_equilibrate(model, k, zeta, pool_size, sweeps, &task);
            let mut rng = task.child(1).rng();
            let z = zeta.as_c64();
            let sample = |d: u32, rng: &mut rand_chacha::ChaCha12Rng| -> Vec<f64> {
                (0..pool_size)
                    .map(|_| {
                        let mut sum = Complex64::default();
                        for _ in 0..d {
                            sum += pool.draw(rng);
                        }
                        let pot = model.lambda * model.sample_one(rng);
                        (Complex64::new(pot, 0.0) - z - sum).inv().im / std::f64::consts::PI
                    })
                    .collect()
            };
            let rooted_vals = sample(k, &mut rng);
            let full_vals = sample(k + 1, &mut rng);
            per_eta.push(DosRow {
                e,
                eta,
                rooted: stats::mean(&rooted_vals),
                rooted_stderr: stats::stderr_mean(&rooted_vals),
                full: stats::mean(&full_vals),
                full_stderr: stats::stderr_mean(&full_vals),
            });
        }
        let last = per_eta[per_eta.len() - 1];
        let converged = if per_eta.len() >= 2 {
            let prev = per_eta[per_eta.len() - 2];
            (last.full - prev.full).abs()
                < 3.0 * (last.full_stderr.powi(2) + prev.full_stderr.powi(2)).sqrt()
        } else {
            true
        };
        extrapolated.push(DosPoint {
            e,
            eta: last.eta,
            rooted: last.rooted,
            full: last.full,
            stderr: last.full_stderr,
            converged,
        });
        rows.extend(per_eta);
    }
    DosEstimate { rows, extrapolated }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// λ = 0 closed forms: the rooted density is √((4K−E²)₊)/(2πK) and the
    /// full-tree value follows from Im(−1/σ)/π with σ = ζ + (K+1)Γ₀.
    #[test]
    fn free_closed_forms_at_band_center() {
        let model = DisorderModel::uniform_symmetric(0.0).unwrap();
        let seed = RealizationSeed::with_path(404, &[0]);
        let est = estimate_dos(&model, 2, &[0.0], &[1e-3, 1e-4, 1e-5], 512, 50, &seed);
        let p = est.extrapolated[0];
        let rooted_oracle = (4.0 * 2.0f64 - 0.0).sqrt() / (2.0 * std::f64::consts::PI * 2.0);
        assert!((rooted_oracle - 0.22508).abs() < 1e-4);
        assert!((p.rooted - rooted_oracle).abs() < 1e-3, "rooted {}", p.rooted);
        assert!((p.full - 0.15005).abs() < 1e-3, "full {}", p.full);
    }

    #[test]
    fn vanishes_off_spectrum() {
        let model = DisorderModel::uniform_symmetric(0.0).unwrap();
        let seed = RealizationSeed::with_path(405, &[0]);
        let est = estimate_dos(&model, 2, &[3.0], &[1e-4, 1e-5], 256, 50, &seed);
        let p = est.extrapolated[0];
        assert!(p.rooted.abs() < 1e-4, "rooted {}", p.rooted);
        assert!(p.full.abs() < 1e-4);
        assert!(p.rooted >= 0.0 && p.full >= 0.0);
    }
}
