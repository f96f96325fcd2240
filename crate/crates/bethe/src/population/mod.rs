//! Monte Carlo machinery for the infinite tree.
//!
//! The distributional fixed point of Γ = (λV − ζ − Σ_{j=1..K} Γ_j)⁻¹ is
//! represented by a population of samples ([`GammaPool`]); a depth-R
//! recursion would cost K^R, the pool costs O(P·sweeps). Chains of Γ values
//! sampled backward from the pool give path products distributed like
//! G(0,x;ζ), from which the Lyapunov exponent, the fractional-moment free
//! energy and its Legendre transform, and the density of states are
//! estimated.

mod chain;
mod dos;
mod free_energy;
mod pool;

pub use chain::{chain_cumulative_logs, sample_gamma_chain, ChainSet};
pub use dos::{estimate_dos, DosEstimate, DosPoint, DosRow};
pub use free_energy::{
    estimate_free_energy, fekete_consistency, legendre_at, legendre_dual, legendre_rate,
    phi1_extrapolated, FeketePair, FeketeReport, FreeEnergyCurve, Phi1, RateFunction,
    BOOTSTRAP_RESAMPLES,
};
pub use pool::{
    estimate_lyapunov, lyapunov_boundary, percentile_xi, pool_equilibrate, EtaRow, GammaPool,
    LyapunovBoundary, DEFAULT_ETA_SEQUENCE,
};
