//! Multiscale cascade laboratory.
//!
//! Four models share one wavenumber ladder and one measurement instrument:
//!
//! - [`goy`]: the GOY shell model of turbulence, integrated to a
//!   statistically steady state with time-averaged spectra and energy fluxes.
//! - [`pao`]: closed-form inertial/dissipation-range spectra and fluxes with
//!   an internal consistency check.
//! - [`finance`]: a hierarchical wealth cascade on the same ladder, relaxed
//!   to steady state and inverted into a wealth distribution, plus the
//!   fiscal-tree corollary.
//! - [`equilibrium`]: the conservative kinetic-exchange baseline with its
//!   exponential stationary distribution.
//!
//! [`statfit`] extracts every exponent by least squares on transformed
//! coordinates; [`verify`] bundles the end-to-end checks behind the CLI
//! `verify` subcommand and the acceptance test target.

pub mod config;
pub mod equilibrium;
pub mod error;
pub mod finance;
pub mod goy;
pub mod grid;
pub mod manifest;
pub mod output;
pub mod pao;
pub mod runner;
pub mod series;
pub mod statfit;
pub mod verify;

pub use config::{
    default_config, load_config, parse_config, validate_config, ModelKind, ModelParams, SimConfig,
};
pub use error::{Error, Result};
pub use grid::ShellGrid;
pub use series::SpectrumSeries;
pub use statfit::FitResult;
