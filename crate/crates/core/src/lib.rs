//! Transmit design for integrated sensing, communication, and power transfer
//! (ISCPT) with multi-antenna base stations.
//!
//! - [`scenario`]: arrays, channels, receivers, targets and scenario files.
//! - [`metrics`]: CRBs, rate, SINR, harvested energy, beampatterns.
//! - [`solver`]: PSD projection, water-filling, augmented-Lagrangian solver,
//!   difference-of-convex rank-one recovery.
//! - [`pareto`]: vertex designs and the three-way boundary tracer.
//! - [`multiuser`]: CRB-minimizing beamforming with SINR/energy constraints.
//! - [`beampattern`]: multi-target beampattern matching.
//! - [`wpt_isac`]: power-beacon charged ISAC devices.
//! - [`signal_chain`]: FMCW ranging, QPSK EVM and RF-to-DC harvesting.

pub mod beampattern;
pub mod error;
pub mod functionals;
pub mod linalg;
pub mod metrics;
pub mod multiuser;
pub mod pareto;
pub mod scenario;
pub mod signal_chain;
pub mod solver;
pub mod wpt_isac;

pub use error::{Error, Result};
