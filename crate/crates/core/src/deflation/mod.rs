//! Subdomain deflation.
//!
//! Each subdomain contributes a few vectors to the deflation space `Z`
//! (a constant, optionally plus centered coordinates). `A Z` and
//! `E = Z^T A Z` are assembled explicitly; `E` is replicated and factorized
//! on every subdomain, and the projector `P = I - A Z E^{-1} Z^T` is applied
//! matrix-free with one reduction of length `dim Z`.

mod basis;
mod solver;

pub use basis::{build_basis, project, CoarseSolver, DeflationBasis, DeflationKind};
pub(crate) use solver::collect;
pub use solver::{
    run_deflated, solve_block_local, solve_deflated, solve_inexact_deflated, DeflatedPreconditioner, DeflatedRun,
    DeflatedSolver, DeflationMode, DeflationOptions, DistMatrix, LocalAmg, ProjectedOperator, Timings,
};
