//! Downlink HetNet simulator and joint optimizer for eICIC.
//!
//! A scenario is a macro/pico layout with a channel gain tensor
//! ([`topology`]), turned into per-RB spectral efficiencies for the ABS and
//! non-ABS phases ([`radio`]). The [`solver`] alternates between UE
//! association, the ABS fraction and per-RB proportional-fair shares;
//! [`baselines`] provides the conventional max-RSRP and CRE-bias schemes and
//! [`metrics`] turns any [`solver::Solution`] into throughput statistics.

pub mod baselines;
pub mod config;
mod error;
pub mod io;
pub mod metrics;
pub mod radio;
pub mod scenario;
pub mod solver;
pub mod topology;

pub use config::{FadingModel, NetworkConfig, PathLossParams};
pub use error::{Error, Result};
pub use scenario::Scenario;
