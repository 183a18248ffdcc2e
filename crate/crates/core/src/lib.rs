//! Simulation library for cavity-mediated spin-exchange dynamics of spin-1
//! atomic ensembles.
//!
//! The library covers four layers of modeling:
//!
//! * [`coupling`] — spatial mode profiles and the long-range coupling graph
//!   (exchange couplings, longitudinal fields, relaxation rates) generated by
//!   a driven cavity mode,
//! * [`meanfield`] — mean-field dynamics of an extended cloud of spin-1 sites
//!   under the XY-form exchange Hamiltonian with per-site relaxation,
//! * [`spinmixing`] — the three-bosonic-mode pair-creation model: analytic
//!   undepleted-pump growth, instability classification, and semiclassical
//!   (truncated-Wigner) trajectory ensembles,
//! * [`exact`] — exact quantum oracles for small instances: dense evolution
//!   of few-site spin-1 chains (unitary and Lindblad) and Fock-space
//!   evolution of the three-mode model.
//!
//! The [`scenarios`] module wires these together behind a declarative
//! configuration ([`config`]) consumed by the `cavity-spin` command-line tool.

// validation guards are written as `!(x > 0.0)` so that NaN fails them too;
// index loops over parallel numeric arrays stay as plain loops
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod coupling;
pub mod error;
pub mod exact;
pub mod integrate;
pub mod linalg;
pub mod meanfield;
pub mod output;
pub mod params;
pub mod scenarios;
pub mod spin1;
pub mod spinmixing;
pub mod units;

pub use error::{Result, SimError};
pub use params::PhysicalParams;
