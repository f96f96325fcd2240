//! Numerical spectral analysis of random Schrödinger operators `T + λV` on
//! regular rooted trees.
//!
//! The library is organized around the cavity (forward) Green function
//! `Γ(u;ζ)` of the rooted tree: on finite truncated trees the recursion is
//! exact and linear-time ([`greens`]), and on the infinite tree a population
//! of `Γ` samples represents the stationary cavity law ([`population`]).
//! From those two layers the crate builds
//!
//! - Lyapunov exponents `L_λ(E) = −E[log|Γ|]` and their closed forms at
//!   `λ = 0`,
//! - free energies `φ_λ(s;E)` of the fractional moments `E[|G(0,x)|^s]`
//!   together with Legendre-transform rate functions,
//! - density-of-states estimates from `Im G/π`,
//! - mobility-edge classification of `(E, λ)` points ([`phase`]),
//! - resonance-counting experiments, tilted (importance-sampled) chain
//!   statistics, and statistical verification of weak-L¹ / fractional-moment
//!   bounds ([`resonance`]).
//!
//! All randomness flows from a [`seed::RealizationSeed`]: a master seed plus
//! a stream path, hashed into an independent ChaCha stream per task.

pub mod disorder;
pub mod greens;
pub mod phase;
pub mod population;
pub mod quad;
pub mod resonance;
pub mod seed;
pub mod stats;

pub use greens::ComplexEnergy;
