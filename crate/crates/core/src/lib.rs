//! Energy-optimal computation offloading for wireless devices that share one
//! edge-cloud server.
//!
//! Each device either processes its periodic job locally or ships a fraction
//! of the data over its FDMA uplink share. [`optimizer`] picks the fractions
//! that minimise the devices' total energy under the server's cycle budget,
//! [`oracle`] re-derives the same optima by brute force, and [`experiments`]
//! runs the Monte-Carlo sweeps behind the `edge-offload` CLI.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod model;
pub mod optimizer;
pub mod oracle;
pub mod problem;
pub mod validation;

pub use config::{RunConfig, ScenarioConfig};
pub use model::{EnergyBreakdown, UserInstance, WorkloadSpec};
pub use problem::{Mode, OffloadSolution, Problem, Regime};
