//! Set-membership target localization from bearing-only sensors.
//!
//! Estimates are 2D ellipsoids `{x : (x - c)ᵀ P⁻¹ (x - c) ≤ 1}`. Agents turn
//! noisy bearings into measurement ellipses, fuse them with Kalman fusion,
//! and exchange estimates with peers using one of several conservative rules.

pub mod agent;
pub mod bearing;
pub mod config;
pub mod counterexample;
pub mod ellipsoid;
pub mod error;
pub mod fusion;
pub mod linalg;
pub mod montecarlo;
pub mod netsim;
pub mod report;
pub mod search;
pub mod streams;

pub use ellipsoid::Ellipsoid;
pub use error::{Error, Result};
pub use fusion::{fuse, AlphaCriterion, FusionMethod, FusionOutcome};
pub use linalg::{SpdMatrix2, Vec2};
