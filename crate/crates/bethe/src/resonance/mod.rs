//! Numerical experiments on the resonance mechanism.
//!
//! Rare sites x on the sphere S_n where the diagonal Green function blows
//! up (|G(x,x)| ≥ τ) while the Green function from the root keeps a regular
//! decay produce |G(0,x)| ≥ e^{δn}; counting such joint events with first
//! and second moments quantifies whether blow-ups proliferate. The module
//! evaluates the event indicators exactly on finite balls with pool-fed
//! boundaries, counts resonances (exhaustively or by sampled sites),
//! drives the s-tilted chain sampler, and runs the statistical checks of
//! the weak-L¹, fractional-moment, two-site, and large-deviation bounds.

mod bounds;
mod config;
mod counting;
mod events;
mod tilted;

pub use bounds::{
    kappa_hat, ldp_bounds_check, tightness_diagnostic, weak_l1_suite, B8Row, BandReport,
    LdpReport, OverlayRow, TightnessRow, TwoSiteRow, WeakL1Report, WeakL1Row,
};
pub use config::{ConstraintReport, LdParameters, ResonanceConfig, ResonanceMode};
pub use counting::{count_resonances, resonance_micro_oracle, CountStatistics, MicroOracle};
pub use events::{evaluate_events, EventRecord, LdEventRecord, SphereSites};
pub use tilted::{tilted_expectation, TiltedEstimate};
