use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::runtime::Partition;
use crate::sparse::CsrMatrix;

/// A saddle-point matrix `[[K, G], [D, S]]` split by a pressure mask.
///
/// Velocity (mask `false`) and pressure (mask `true`) unknowns keep their
/// relative order from the monolithic numbering.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub k: CsrMatrix,
    pub g: CsrMatrix,
    pub d: CsrMatrix,
    pub s: CsrMatrix,
    mask: Vec<bool>,
    inv_k_diag: Vec<f64>,
    /// Monolithic index -> index within its block.
    block_index: Vec<usize>,
    pressure_coords: Option<Vec<[f64; 3]>>,
}

/// Extracts the four blocks of `a` selected by `mask` (`true` = pressure).
pub fn split_blocks(a: &CsrMatrix, mask: &[bool]) -> Result<BlockSystem> {
    if !a.is_square() || mask.len() != a.nrows() {
        return Err(Error::dim(format!(
            "pressure mask of length {} for a {}x{} matrix",
            mask.len(),
            a.nrows(),
            a.ncols()
        )));
    }
    let mut block_index = Vec::with_capacity(mask.len());
    let (mut nu, mut np) = (0, 0);
    for &m in mask {
        if m {
            block_index.push(np);
            np += 1;
        } else {
            block_index.push(nu);
            nu += 1;
        }
    }
    let mut kt = Vec::new();
    let mut gt = Vec::new();
    let mut dt = Vec::new();
    let mut st = Vec::new();
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        let bi = block_index[i];
        for (&j, &v) in cols.iter().zip(vals) {
            let bj = block_index[j];
            match (mask[i], mask[j]) {
                (false, false) => kt.push((bi, bj, v)),
                (false, true) => gt.push((bi, bj, v)),
                (true, false) => dt.push((bi, bj, v)),
                (true, true) => st.push((bi, bj, v)),
            }
        }
    }
    let k = CsrMatrix::from_triplets(nu, nu, &kt)?;
    let inv_k_diag = k
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d == 0.0 || !d.is_finite() {
                Err(Error::Structure(format!("velocity block has zero diagonal in row {i}")))
            } else {
                Ok(1.0 / d)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockSystem {
        k,
        g: CsrMatrix::from_triplets(nu, np, &gt)?,
        d: CsrMatrix::from_triplets(np, nu, &dt)?,
        s: CsrMatrix::from_triplets(np, np, &st)?,
        mask: mask.to_vec(),
        inv_k_diag,
        block_index,
        pressure_coords: None,
    })
}

impl BlockSystem {
    pub fn n(&self) -> usize {
        self.mask.len()
    }

    pub fn n_u(&self) -> usize {
        self.k.nrows()
    }

    pub fn n_p(&self) -> usize {
        self.s.nrows()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// `diag(K)^{-1}`.
    pub fn inv_k_diag(&self) -> &[f64] {
        &self.inv_k_diag
    }

    /// Coordinates of the pressure unknowns, used by linear deflation in the
    /// pressure solve.
    pub fn pressure_coords(&self) -> Option<&[[f64; 3]]> {
        self.pressure_coords.as_deref()
    }

    pub fn with_pressure_coords(mut self, coords: Vec<[f64; 3]>) -> Result<Self> {
        if coords.len() != self.n_p() {
            return Err(Error::dim(format!(
                "{} pressure coordinates for {} pressure unknowns",
                coords.len(),
                self.n_p()
            )));
        }
        self.pressure_coords = Some(coords);
        Ok(self)
    }

    /// The monolithic matrix in the original numbering.
    pub fn reassemble(&self) -> CsrMatrix {
        let mut u_of = Vec::with_capacity(self.n_u());
        let mut p_of = Vec::with_capacity(self.n_p());
        for (i, &m) in self.mask.iter().enumerate() {
            if m {
                p_of.push(i);
            } else {
                u_of.push(i);
            }
        }
        let mut t = Vec::with_capacity(self.k.nnz() + self.g.nnz() + self.d.nnz() + self.s.nnz());
        let mut push = |m: &CsrMatrix, rows: &[usize], cols: &[usize]| {
            for i in 0..m.nrows() {
                let (c, v) = m.row(i);
                for (&j, &x) in c.iter().zip(v) {
                    t.push((rows[i], cols[j], x));
                }
            }
        };
        push(&self.k, &u_of, &u_of);
        push(&self.g, &u_of, &p_of);
        push(&self.d, &p_of, &u_of);
        push(&self.s, &p_of, &p_of);
        CsrMatrix::from_triplets(self.n(), self.n(), &t).expect("blocks index within bounds")
    }

    /// Splits a monolithic vector into `(velocity, pressure)` parts.
    pub fn split_vector(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.n() {
            return Err(Error::dim(format!("vector of {} for {} unknowns", x.len(), self.n())));
        }
        Ok(split_by_mask(&self.mask, x))
    }

    /// Inverse of [`split_vector`](Self::split_vector).
    pub fn merge_vector(&self, u: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.n_u() || p.len() != self.n_p() {
            return Err(Error::dim("velocity/pressure parts do not match the blocks"));
        }
        Ok(merge_by_mask(&self.mask, u, p))
    }

    /// `S - D diag(K)^{-1} G`, formed explicitly.
    pub fn schur_approximation(&self) -> Result<CsrMatrix> {
        let mut t = Vec::with_capacity(self.g.nnz());
        for i in 0..self.g.nrows() {
            let (c, v) = self.g.row(i);
            for (&j, &x) in c.iter().zip(v) {
                t.push((i, j, self.inv_k_diag[i] * x));
            }
        }
        let scaled = CsrMatrix::from_triplets(self.g.nrows(), self.g.ncols(), &t)?;
        let dkg = self.d.spgemm(&scaled)?;
        let mut out = Vec::with_capacity(self.s.nnz() + dkg.nnz());
        for (m, sign) in [(&self.s, 1.0), (&dkg, -1.0)] {
            for i in 0..m.nrows() {
                let (c, v) = m.row(i);
                out.extend(c.iter().zip(v).map(|(&j, &x)| (i, j, sign * x)));
            }
        }
        CsrMatrix::from_triplets(self.n_p(), self.n_p(), &out)
    }

    /// Velocity and pressure partitions induced by a partition of the
    /// monolithic unknowns.
    pub fn block_partitions(&self, part: &Partition) -> Result<(Partition, Partition)> {
        if part.nglobal() != self.n() {
            return Err(Error::dim(format!(
                "partition covers {} unknowns, system has {}",
                part.nglobal(),
                self.n()
            )));
        }
        let mut us = Vec::with_capacity(part.len());
        let mut ps = Vec::with_capacity(part.len());
        for r in part.ranges() {
            let np = self.mask[r.clone()].iter().filter(|&&m| m).count();
            ps.push(np);
            us.push(r.len() - np);
        }
        Ok((Partition::from_sizes(&us), Partition::from_sizes(&ps)))
    }

    /// Index of monolithic unknown `i` within its own block.
    pub fn block_index(&self, i: usize) -> usize {
        self.block_index[i]
    }
}

pub(crate) fn split_by_mask(mask: &[bool], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut u = Vec::with_capacity(x.len());
    let mut p = Vec::new();
    for (&m, &v) in mask.iter().zip(x) {
        if m {
            p.push(v);
        } else {
            u.push(v);
        }
    }
    (u, p)
}

pub(crate) fn merge_by_mask(mask: &[bool], u: &[f64], p: &[f64]) -> Vec<f64> {
    let (mut iu, mut ip) = (u.iter(), p.iter());
    mask.iter()
        .map(|&m| if m { *ip.next().unwrap() } else { *iu.next().unwrap() })
        .collect()
}

/// Matrix-free `p -> S p - D diag(K)^{-1} G p`.
pub struct SchurOperator<'a> {
    sys: &'a BlockSystem,
}

/// The Schur complement approximation of `sys` as an operator.
pub fn schur_operator(sys: &BlockSystem) -> SchurOperator<'_> {
    SchurOperator { sys }
}

impl LinearOperator for SchurOperator<'_> {
    fn apply(&self, p: &[f64], y: &mut [f64]) -> Result<()> {
        let sys = self.sys;
        let mut t = sys.g.mul_vec(p)?;
        t.iter_mut().zip(&sys.inv_k_diag).for_each(|(t, d)| *t *= d);
        sys.s.spmv(1.0, p, 0.0, y)?;
        sys.d.spmv(-1.0, &t, 1.0, y)
    }
}
