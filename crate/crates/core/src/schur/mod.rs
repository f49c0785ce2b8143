//! Pressure Schur-complement block preconditioner for saddle-point systems
//! `[[K, G], [D, S]] [u; p] = [b_u; b_p]`.
//!
//! Each application performs an inexact velocity solve, an inexact
//! matrix-free solve with `S - D diag(K)^{-1} G` (preconditioned by
//! deflation plus local AMG), and a second velocity solve with the updated
//! pressure. Since the inner solves are iterative, the outer method is
//! FGMRES.

mod blocks;
mod precond;

pub use blocks::{schur_operator, split_blocks, BlockSystem, SchurOperator};
pub use precond::{
    apply_schur_preconditioner, distribute_blocks, solve_block_system, BlockRun, DiagonalPreconditioner,
    DistSchurOperator, LocalBlocks, SchurParams, SchurPreconditioner,
};
