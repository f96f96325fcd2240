//! Random-potential distribution families and their regularity data.
//!
//! A [`DisorderModel`] carries the density ρ of the single-site potential,
//! the disorder strength λ, and the quantities the Green-function bounds
//! consume: the sup norm ‖ρ‖∞, the fractional-moment exponent ς with
//! ∫|v|^ς ρ < ∞, and the constant c bounding ρ against its minimal function
//! M(v) = inf_ν (2ν)⁻¹ ∫ 1_{|x−v|≤ν} ρ(x) dx.

use crate::quad::adaptive_simpson;
use crate::seed::RealizationSeed;
use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use thiserror::Error;

/// Default logarithmic ν grid for the minimal function: 32 points in
/// [1e-4, 1]. Minimizing over a finite grid biases the estimate upward, so
/// the regularity constant computed against it is conservative.
pub fn default_nu_grid() -> Vec<f64> {
    let n = 32;
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            1e-4_f64.powf(1.0 - t)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Gaussian { mean: f64, std: f64 },
    Cauchy { location: f64, scale: f64 },
    /// Uniform on [-1, 1].
    UniformSymmetric,
    /// Piecewise-constant density: heights[i] on [breakpoints[i], breakpoints[i+1]).
    /// Heights are normalized at construction.
    PiecewiseConstant { breakpoints: Vec<f64>, heights: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    FullLine,
    Interval(f64, f64),
}

#[derive(Debug, Error)]
pub enum DisorderError {
    #[error("invalid parameter for {family}: {message}")]
    InvalidParameter { family: &'static str, message: String },
    #[error("density is not dominated by its minimal function: ratio exceeds 1e6 at v = {v}")]
    UnboundedRatio { v: f64 },
}

#[derive(Debug, Clone)]
pub struct DisorderModel {
    family: Family,
    pub lambda: f64,
    /// ‖ρ‖∞
    pub sup_norm: f64,
    /// c with ρ(v) ≤ c·M(v); computed against the grid minimal function.
    pub regularity_c: f64,
    /// ς ∈ (0,1) with ∫|v|^ς ρ < ∞.
    pub moment_exponent: f64,
    /// Density bounded below on compacts (needs full-line support).
    pub assumption_e: bool,
    pub support: Support,
}

impl DisorderModel {
    pub fn gaussian(mean: f64, std: f64, lambda: f64) -> Result<Self, DisorderError> {
        if !(std > 0.0) || !std.is_finite() || !mean.is_finite() {
            return Err(DisorderError::InvalidParameter {
                family: "gaussian",
                message: format!("mean = {mean}, std = {std}"),
            });
        }
        check_lambda(lambda)?;
        let sup_norm = 1.0 / (std * (2.0 * std::f64::consts::PI).sqrt());
        let mut model = Self {
            family: Family::Gaussian { mean, std },
            lambda,
            sup_norm,
            regularity_c: f64::NAN,
            moment_exponent: 0.5,
            assumption_e: true,
            support: Support::FullLine,
        };
        model.regularity_c = model.regularity_constant(&model.default_v_grid())?;
        Ok(model)
    }

    pub fn cauchy(location: f64, scale: f64, lambda: f64) -> Result<Self, DisorderError> {
        if !(scale > 0.0) || !scale.is_finite() || !location.is_finite() {
            return Err(DisorderError::InvalidParameter {
                family: "cauchy",
                message: format!("location = {location}, scale = {scale}"),
            });
        }
        check_lambda(lambda)?;
        let sup_norm = 1.0 / (std::f64::consts::PI * scale);
        let mut model = Self {
            family: Family::Cauchy { location, scale },
            lambda,
            sup_norm,
            regularity_c: f64::NAN,
            // any ς < 1 gives a finite Cauchy moment; 0.5 balances tail
            // heaviness against estimator variance
            moment_exponent: 0.5,
            assumption_e: true,
            support: Support::FullLine,
        };
        model.regularity_c = model.regularity_constant(&model.default_v_grid())?;
        Ok(model)
    }

    pub fn uniform_symmetric(lambda: f64) -> Result<Self, DisorderError> {
        check_lambda(lambda)?;
        let mut model = Self {
            family: Family::UniformSymmetric,
            lambda,
            sup_norm: 0.5,
            regularity_c: f64::NAN,
            moment_exponent: 0.5,
            assumption_e: false,
            support: Support::Interval(-1.0, 1.0),
        };
        model.regularity_c = model.regularity_constant(&model.default_v_grid())?;
        Ok(model)
    }

    /// Un-normalized heights are accepted and rescaled so the total mass is 1.
    pub fn piecewise_constant(
        breakpoints: Vec<f64>,
        heights: Vec<f64>,
        lambda: f64,
    ) -> Result<Self, DisorderError> {
        if breakpoints.len() < 2 || heights.len() + 1 != breakpoints.len() {
            return Err(DisorderError::InvalidParameter {
                family: "piecewise",
                message: format!(
                    "need n+1 breakpoints for n heights, got {} and {}",
                    breakpoints.len(),
                    heights.len()
                ),
            });
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(DisorderError::InvalidParameter {
                family: "piecewise",
                message: "breakpoints must be strictly increasing".into(),
            });
        }
        if heights.iter().any(|&h| h < 0.0 || !h.is_finite()) {
            return Err(DisorderError::InvalidParameter {
                family: "piecewise",
                message: "heights must be finite and nonnegative".into(),
            });
        }
        check_lambda(lambda)?;
        let mass: f64 = heights
            .iter()
            .zip(breakpoints.windows(2))
            .map(|(h, w)| h * (w[1] - w[0]))
            .sum();
        if !(mass > 0.0) {
            return Err(DisorderError::InvalidParameter {
                family: "piecewise",
                message: "total mass must be positive".into(),
            });
        }
        let heights: Vec<f64> = heights.iter().map(|h| h / mass).collect();
        let sup_norm = heights.iter().cloned().fold(0.0, f64::max);
        let support = Support::Interval(breakpoints[0], *breakpoints.last().unwrap());
        let mut model = Self {
            family: Family::PiecewiseConstant { breakpoints, heights },
            lambda,
            sup_norm,
            regularity_c: f64::NAN,
            moment_exponent: 0.5,
            assumption_e: false,
            support,
        };
        model.regularity_c = model.regularity_constant(&model.default_v_grid())?;
        Ok(model)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut m = self.clone();
        m.lambda = lambda;
        m
    }

    /// ρ(v); zero outside the support.
    pub fn density(&self, v: f64) -> f64 {
        match &self.family {
            Family::Gaussian { mean, std } => {
                let z = (v - mean) / std;
                (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
            }
            Family::Cauchy { location, scale } => {
                let d = v - location;
                scale / (std::f64::consts::PI * (d * d + scale * scale))
            }
            Family::UniformSymmetric => {
                if (-1.0..=1.0).contains(&v) {
                    0.5
                } else {
                    0.0
                }
            }
            Family::PiecewiseConstant { breakpoints, heights } => {
                if v < breakpoints[0] || v > *breakpoints.last().unwrap() {
                    return 0.0;
                }
                let seg = breakpoints[1..].partition_point(|&b| b <= v);
                heights[seg.min(heights.len() - 1)]
            }
        }
    }

    /// One draw of V.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.family {
            Family::Gaussian { mean, std } => Normal::new(*mean, *std).unwrap().sample(rng),
            Family::Cauchy { location, scale } => Cauchy::new(*location, *scale).unwrap().sample(rng),
            Family::UniformSymmetric => rng.gen_range(-1.0..=1.0),
            Family::PiecewiseConstant { breakpoints, heights } => {
                // inverse CDF of the piecewise-linear distribution function
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (i, h) in heights.iter().enumerate() {
                    let w = breakpoints[i + 1] - breakpoints[i];
                    let seg_mass = h * w;
                    if u < acc + seg_mass || i == heights.len() - 1 {
                        if *h <= 0.0 {
                            continue;
                        }
                        return breakpoints[i] + (u - acc) / h;
                    }
                    acc += seg_mass;
                }
                *breakpoints.last().unwrap()
            }
        }
    }

    /// `count` iid draws of V; deterministic given the seed.
    pub fn sample_potential(&self, seed: &RealizationSeed, count: usize) -> Vec<f64> {
        assert!(count >= 1, "count must be >= 1");
        let mut rng = seed.rng();
        (0..count).map(|_| self.sample_one(&mut rng)).collect()
    }

    /// Window average (2ν)⁻¹ ∫_{v−ν}^{v+ν} ρ.
    fn window_average(&self, v: f64, nu: f64) -> f64 {
        match &self.family {
            Family::Gaussian { .. } | Family::Cauchy { .. } => {
                adaptive_simpson(&|x| self.density(x), v - nu, v + nu, 1e-10) / (2.0 * nu)
            }
            // piecewise-constant densities integrate exactly by segment overlap
            Family::UniformSymmetric => {
                let lo = (v - nu).max(-1.0);
                let hi = (v + nu).min(1.0);
                if hi <= lo {
                    0.0
                } else {
                    0.5 * (hi - lo) / (2.0 * nu)
                }
            }
            Family::PiecewiseConstant { breakpoints, heights } => {
                let mut acc = 0.0;
                for (i, h) in heights.iter().enumerate() {
                    let lo = (v - nu).max(breakpoints[i]);
                    let hi = (v + nu).min(breakpoints[i + 1]);
                    if hi > lo {
                        acc += h * (hi - lo);
                    }
                }
                acc / (2.0 * nu)
            }
        }
    }

    /// Grid upper bound for the minimal function: min over `nu_grid` of the
    /// window averages.
    pub fn minimal_function(&self, v: f64, nu_grid: &[f64]) -> f64 {
        assert!(!nu_grid.is_empty(), "nu grid must be nonempty");
        assert!(
            nu_grid.iter().all(|&nu| nu > 0.0 && nu <= 1.0),
            "nu grid values must lie in (0, 1]"
        );
        nu_grid
            .iter()
            .map(|&nu| self.window_average(v, nu))
            .fold(f64::INFINITY, f64::min)
    }

    /// max over `v_grid` of ρ(v)/M̂(v), the constant of the regularity bound.
    pub fn regularity_constant(&self, v_grid: &[f64]) -> Result<f64, DisorderError> {
        let nu_grid = default_nu_grid();
        let mut c: f64 = 0.0;
        for &v in v_grid {
            let rho = self.density(v);
            if rho == 0.0 {
                continue;
            }
            let m_hat = self.minimal_function(v, &nu_grid);
            let ratio = rho / m_hat;
            if !ratio.is_finite() || ratio > 1e6 {
                return Err(DisorderError::UnboundedRatio { v });
            }
            c = c.max(ratio);
        }
        Ok(c)
    }

    /// Grid covering the effective support, used for the stored constant.
    pub fn default_v_grid(&self) -> Vec<f64> {
        let (lo, hi) = match (&self.family, self.support) {
            (Family::Gaussian { mean, std }, _) => (mean - 8.0 * std, mean + 8.0 * std),
            (Family::Cauchy { location, scale }, _) => (location - 50.0 * scale, location + 50.0 * scale),
            (_, Support::Interval(a, b)) => (a, b),
            (_, Support::FullLine) => (-50.0, 50.0),
        };
        let n = 129;
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    /// ∫ρ by quadrature on a family-specific grid. For Cauchy the tangent
    /// substitution v = loc + scale·tan θ maps the integrand to the constant
    /// 1/π, so the full-line mass is captured exactly.
    pub fn mass(&self) -> f64 {
        match &self.family {
            Family::Gaussian { mean, std } => {
                adaptive_simpson(&|x| self.density(x), mean - 12.0 * std, mean + 12.0 * std, 1e-12)
            }
            Family::Cauchy { location, scale } => {
                let half_pi = std::f64::consts::FRAC_PI_2;
                adaptive_simpson(
                    &|theta: f64| {
                        let v = location + scale * theta.tan();
                        let dv = scale / theta.cos().powi(2);
                        self.density(v) * dv
                    },
                    -half_pi + 1e-9,
                    half_pi - 1e-9,
                    1e-12,
                ) + 2.0 * 1e-9 / std::f64::consts::PI
            }
            Family::UniformSymmetric => adaptive_simpson(&|x| self.density(x), -1.0, 1.0, 1e-12),
            Family::PiecewiseConstant { breakpoints, .. } => adaptive_simpson(
                &|x| self.density(x),
                breakpoints[0],
                *breakpoints.last().unwrap(),
                1e-12,
            ),
        }
    }

    /// ∫|v|^ς ρ(v) dv for the stored exponent.
    pub fn fractional_moment(&self) -> f64 {
        let s = self.moment_exponent;
        match &self.family {
            Family::Cauchy { location, scale } => {
                let half_pi = std::f64::consts::FRAC_PI_2;
                adaptive_simpson(
                    &|theta: f64| {
                        let v = location + scale * theta.tan();
                        v.abs().powf(s) / std::f64::consts::PI
                    },
                    -half_pi + 1e-12,
                    half_pi - 1e-12,
                    1e-8,
                )
            }
            Family::Gaussian { mean, std } => adaptive_simpson(
                &|v: f64| v.abs().powf(s) * self.density(v),
                mean - 12.0 * std,
                mean + 12.0 * std,
                1e-10,
            ),
            _ => {
                let (a, b) = match self.support {
                    Support::Interval(a, b) => (a, b),
                    Support::FullLine => unreachable!(),
                };
                adaptive_simpson(&|v: f64| v.abs().powf(s) * self.density(v), a, b, 1e-10)
            }
        }
    }
}

fn check_lambda(lambda: f64) -> Result<(), DisorderError> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(DisorderError::InvalidParameter {
            family: "model",
            message: format!("lambda must be finite and nonnegative, got {lambda}"),
        });
    }
    Ok(())
}
