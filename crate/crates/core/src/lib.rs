//! Dissipative quantum computation and state engineering on small dense systems.
//!
//! The crate is organized bottom-up:
//! [`quantum`] (registers, operators, states), [`liouville`] (Lindblad generators and
//! cp-map channels), then the applications [`dqc`], [`dse`], [`mps`] and [`reservoir`].
//! [`formats`] reads the TOML instance files used by the command-line runner.

pub mod dqc;
pub mod dse;
pub mod error;
pub mod formats;
pub mod linalg;
pub mod liouville;
pub mod mps;
pub mod quantum;
pub mod random;
pub mod reservoir;

pub use error::{Error, Result};
