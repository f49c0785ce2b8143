//! Test problems and file I/O.

mod mm;
mod poisson;
mod saddle;

pub use mm::{
    parse_mask, parse_matrix_market, parse_vector, read_mask, read_matrix_market, read_vector, write_matrix_market,
    write_vector,
};
pub use poisson::{gen_poisson3d, poisson_matrix, BoxOrdering, GridSpec, ProblemInstance};
pub use saddle::{gen_saddle_point, SaddlePointProblem, PRESSURE_STABILIZATION};
