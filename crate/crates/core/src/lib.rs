//! Pricing engine for the total valuation adjustment (XVA) of a European
//! option under bilateral default risk, asymmetric borrowing/lending rates,
//! and a two-state market-liquidity regime (normal / crisis) in which the
//! repo market freezes and short sales are banned.
//!
//! The crate is organized around the pipeline that produces an XVA number:
//!
//! * [`regime`] — simulation and analytics of the alternating renewal
//!   process that switches the market between the normal and crisis states.
//! * [`regime_estimation`] — estimation of regime-length parameters from a
//!   stress-index time series via threshold segmentation.
//! * [`market`] — market model under the valuation measure: stock dynamics,
//!   risky-bond default intensities, the Black-Scholes reference valuation,
//!   closeout values and portfolio audit helpers.
//! * [`generators`] — exact evaluation of the BSDE drivers, the Lipschitz
//!   constant, and the no-arbitrage / well-posedness parameter checks.
//! * [`bsde`] — numerical solvers (least-squares regression and a
//!   shooting method with a small feed-forward approximator) for the
//!   reduced XVA BSDE, plus expansion to the full defaultable solution.
//! * [`xva`] — orchestration: XVA pricing, hedge-ratio extraction, and
//!   parameter sweeps.

pub mod bsde;
pub mod error;
pub mod generators;
pub mod market;
pub mod numerics;
pub mod regime;
pub mod regime_estimation;
pub mod rng;
pub mod xva;

pub use error::CoreError;
pub use market::{ClaimSpec, MarketParams, OptionKind, PathBundle, RegimeMode};
pub use regime::{Regime, RegimeParams, RegimePath};
pub use xva::XvaReport;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
