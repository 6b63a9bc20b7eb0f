//! Determinantal-point-process rewards for diverse sequence generation.

pub mod cli;
pub mod corpus;
pub mod dpp;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod policy;
pub mod reward;
pub mod seed;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
