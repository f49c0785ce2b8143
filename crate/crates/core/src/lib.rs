//! Distributed sparse solvers built around subdomain deflation with
//! per-subdomain smoothed-aggregation AMG.

pub mod amg;
pub mod bench;
pub mod config;
pub mod deflation;
pub mod error;
pub mod krylov;
pub mod problems;
pub mod runtime;
pub mod schur;
pub mod sparse;

pub use config::SolverConfig;
pub use error::{Error, Result};
