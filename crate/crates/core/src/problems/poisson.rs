use crate::error::{Error, Result};
use crate::runtime::Partition;
use crate::sparse::CsrMatrix;

/// Interior grid of the unit cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::config("grid", format!("grid {nx}x{ny}x{nz} has an empty axis")));
        }
        Ok(Self { nx, ny, nz })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    /// Spacing along x, `1 / (nx + 1)`.
    pub fn h(&self) -> f64 {
        1.0 / (self.nx + 1) as f64
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.dims().map(|n| 1.0 / (n + 1) as f64)
    }

    pub fn npoints(&self) -> usize {
        self.nx * self.ny * self.nz
    }
}

/// A generated or loaded linear system with its distribution.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    /// Position of every unknown (empty when unknown).
    pub coords: Vec<[f64; 3]>,
    pub partition: Partition,
    pub exact: Option<Vec<f64>>,
}

impl ProblemInstance {
    pub fn coords(&self) -> Option<&[[f64; 3]]> {
        (!self.coords.is_empty()).then_some(self.coords.as_slice())
    }
}

/// Splits `n` points into `m` runs, the first `n % m` one longer.
fn axis_splits(n: usize, m: usize, axis: char) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::Partition(format!(
            "cannot split {n} grid points along {axis} into {m} boxes"
        )));
    }
    let (q, r) = (n / m, n % m);
    let mut off = vec![0];
    for p in 0..m {
        off.push(off[p] + q + usize::from(p < r));
    }
    Ok(off)
}

/// Numbering of grid points ordered box by box (x fastest over boxes) and
/// lexicographically (x fastest) within each box.
#[derive(Clone, Debug)]
pub struct BoxOrdering {
    grid: GridSpec,
    /// `index[(k * ny + j) * nx + i]` is the unknown of point `(i, j, k)`.
    index: Vec<usize>,
    /// Grid point of each unknown.
    points: Vec<[usize; 3]>,
    sizes: Vec<usize>,
}

impl BoxOrdering {
    pub fn new(grid: GridSpec, boxes: [usize; 3]) -> Result<Self> {
        let sx = axis_splits(grid.nx, boxes[0], 'x')?;
        let sy = axis_splits(grid.ny, boxes[1], 'y')?;
        let sz = axis_splits(grid.nz, boxes[2], 'z')?;
        let mut index = vec![usize::MAX; grid.npoints()];
        let mut points = Vec::with_capacity(grid.npoints());
        let mut sizes = Vec::with_capacity(boxes.iter().product());
        for bz in 0..boxes[2] {
            for by in 0..boxes[1] {
                for bx in 0..boxes[0] {
                    let before = points.len();
                    for k in sz[bz]..sz[bz + 1] {
                        for j in sy[by]..sy[by + 1] {
                            for i in sx[bx]..sx[bx + 1] {
                                index[(k * grid.ny + j) * grid.nx + i] = points.len();
                                points.push([i, j, k]);
                            }
                        }
                    }
                    sizes.push(points.len() - before);
                }
            }
        }
        Ok(Self {
            grid,
            index,
            points,
            sizes,
        })
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        self.index[(k * self.grid.ny + j) * self.grid.nx + i]
    }

    pub fn points(&self) -> &[[usize; 3]] {
        &self.points
    }

    pub fn partition(&self) -> Partition {
        Partition::from_sizes(&self.sizes)
    }

    pub fn coords(&self) -> Vec<[f64; 3]> {
        let h = self.grid.spacing();
        self.points
            .iter()
            .map(|p| {
                [
                    (p[0] + 1) as f64 * h[0],
                    (p[1] + 1) as f64 * h[1],
                    (p[2] + 1) as f64 * h[2],
                ]
            })
            .collect()
    }

    /// Neighbors of grid point `p` inside the grid, as `(axis, +-1, unknown)`.
    pub fn neighbors(&self, p: [usize; 3]) -> impl Iterator<Item = (usize, i8, usize)> + '_ {
        let dims = self.grid.dims();
        (0..3).flat_map(move |d| {
            let lo = (p[d] > 0).then(|| {
                let mut q = p;
                q[d] -= 1;
                (d, -1i8, self.index(q[0], q[1], q[2]))
            });
            let hi = (p[d] + 1 < dims[d]).then(|| {
                let mut q = p;
                q[d] += 1;
                (d, 1i8, self.index(q[0], q[1], q[2]))
            });
            lo.into_iter().chain(hi)
        })
    }
}

/// `h^2`-scaled 7-point Laplacian (6 on the diagonal, -1 per interior
/// neighbor) in box ordering.
pub fn poisson_matrix(ord: &BoxOrdering) -> Result<CsrMatrix> {
    let n = ord.points.len();
    let mut t = Vec::with_capacity(7 * n);
    for (row, &p) in ord.points.iter().enumerate() {
        t.push((row, row, 6.0));
        t.extend(ord.neighbors(p).map(|(_, _, col)| (row, col, -1.0)));
    }
    CsrMatrix::from_triplets(n, n, &t)
}

/// `-Laplace(u) = 1` on the unit cube with homogeneous Dirichlet
/// conditions, distributed over `boxes[0] x boxes[1] x boxes[2]` subdomains.
pub fn gen_poisson3d(g: &GridSpec, boxes: [usize; 3]) -> Result<ProblemInstance> {
    let ord = BoxOrdering::new(*g, boxes)?;
    let a = poisson_matrix(&ord)?;
    let h = g.h();
    Ok(ProblemInstance {
        b: vec![h * h; a.nrows()],
        a,
        coords: ord.coords(),
        partition: ord.partition(),
        exact: None,
    })
}
