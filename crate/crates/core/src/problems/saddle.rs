use super::poisson::{BoxOrdering, GridSpec};
use crate::error::{Error, Result};
use crate::runtime::Partition;
use crate::schur::{split_blocks, BlockSystem};
use crate::sparse::CsrMatrix;

/// Pressure stabilization factor: `S = -EPSILON h^2 I`.
pub const PRESSURE_STABILIZATION: f64 = 1e-2;

/// A generated saddle-point problem.
#[derive(Clone, Debug)]
pub struct SaddlePointProblem {
    pub system: BlockSystem,
    /// Monolithic matrix (unknowns interleaved per node as `ux, uy, uz, p`).
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    pub mask: Vec<bool>,
    pub partition: Partition,
    pub exact: Vec<f64>,
}

/// Stokes-like system on the interior grid of the unit cube:
///
/// * `K`: 7-point vector Laplacian plus an `h^2` mass term (SPD),
/// * `G`: forward-difference gradient scaled by `h`, `D = G^T`,
/// * `S = -eps h^2 I`.
///
/// The right-hand side is `A x*` for a smooth manufactured `x*`.
pub fn gen_saddle_point(g: &GridSpec, boxes: [usize; 3]) -> Result<SaddlePointProblem> {
    if g.dims().iter().any(|&n| n < 2) {
        return Err(Error::config(
            "grid",
            "saddle-point generator needs at least 2 points per axis",
        ));
    }
    let ord = BoxOrdering::new(*g, boxes)?;
    let h = g.h();
    let nodes = ord.points().len();
    let n = 4 * nodes;
    let ui = |node: usize, d: usize| 4 * node + d;
    let pi = |node: usize| 4 * node + 3;

    let mut t = Vec::with_capacity(n * 9);
    for (node, &p) in ord.points().iter().enumerate() {
        let nbrs: Vec<_> = ord.neighbors(p).collect();
        for d in 0..3 {
            let row = ui(node, d);
            t.push((row, row, 6.0 + h * h));
            t.extend(nbrs.iter().map(|&(_, _, m)| (row, ui(m, d), -1.0)));
            // (G p)_d = h (p_{+d} - p), out-of-domain pressure dropped
            t.push((row, pi(node), -h));
            t.push((pi(node), row, -h));
            if let Some(&(_, _, m)) = nbrs.iter().find(|&&(axis, dir, _)| axis == d && dir == 1) {
                t.push((row, pi(m), h));
                t.push((pi(m), row, h));
            }
        }
        t.push((pi(node), pi(node), -PRESSURE_STABILIZATION * h * h));
    }
    let a = CsrMatrix::from_triplets(n, n, &t)?;
    let mask: Vec<bool> = (0..n).map(|i| i % 4 == 3).collect();

    let coords = ord.coords();
    let pi_ = std::f64::consts::PI;
    let mut exact = Vec::with_capacity(n);
    for c in &coords {
        let (x, y, z) = (c[0], c[1], c[2]);
        exact.push((pi_ * x).sin() * (pi_ * y).sin() * (pi_ * z).sin());
        exact.push((2.0 * pi_ * x).sin() * (pi_ * y).sin() * z);
        exact.push(x * y * (pi_ * z).sin());
        exact.push((pi_ * x).cos() * (pi_ * y).cos() * (pi_ * z).cos());
    }
    let b = a.mul_vec(&exact)?;
    let system = split_blocks(&a, &mask)?.with_pressure_coords(coords)?;
    let partition = Partition::from_sizes(&ord.partition().ranges().map(|r| 4 * r.len()).collect::<Vec<_>>());
    Ok(SaddlePointProblem {
        system,
        a,
        b,
        mask,
        partition,
        exact,
    })
}
