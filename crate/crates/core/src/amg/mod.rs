//! Smoothed-aggregation algebraic multigrid used as the per-subdomain
//! preconditioner.

mod coarsening;
mod hierarchy;
mod relaxation;

pub use coarsening::{
    aggregate, filtered_matrix, smooth_prolongation, strength_graph, tentative_prolongation, Aggregates, UNAGGREGATED,
};
pub use hierarchy::{build_hierarchy, AmgHierarchy, AmgLevel, AmgParams};
pub use relaxation::{apply_smoother, RelaxKind, Smoother};
