use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::krylov::{gmres, FnOperator, Identity, KrylovParams, SolverKind};
use crate::runtime::{Communicator, Serial, SubdomainView};
use crate::sparse::{dot, CsrMatrix, DenseMatrix, LuFactorization};

/// Shape of the per-subdomain deflation vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeflationKind {
    /// One indicator vector per subdomain.
    Constant,
    /// Indicator plus centered coordinates (up to four vectors).
    Linear,
}

impl serde::Serialize for DeflationKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl FromStr for DeflationKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "constant" => Ok(Self::Constant),
            "linear" => Ok(Self::Linear),
            other => Err(format!(
                "unknown deflation kind `{other}` (expected constant or linear)"
            )),
        }
    }
}

impl std::fmt::Display for DeflationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::Linear => "linear",
        })
    }
}

/// How `E^{-1}` is applied.
#[derive(Clone, Debug)]
pub enum CoarseSolver {
    /// LU factors of `E`, replicated on every subdomain.
    Direct(LuFactorization),
    /// Unpreconditioned GMRES on the replicated dense `E` to a relative
    /// tolerance; only usable inside a flexible outer solver.
    Iterative { e: DenseMatrix, tol: f64, maxiter: usize },
}

impl CoarseSolver {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Direct(lu) => lu.solve(rhs),
            Self::Iterative { e, tol, maxiter } => {
                let op = FnOperator(|x: &[f64], y: &mut [f64]| {
                    y.copy_from_slice(&e.matvec(x)?);
                    Ok(())
                });
                let n = rhs.len();
                let params = KrylovParams::new(SolverKind::Gmres, *tol, *maxiter).with_restart(n.max(1));
                let mut x = vec![0.0; n];
                gmres(&Serial, &op, &Identity, rhs, &mut x, &params)?;
                Ok(x)
            }
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Self::Direct(_))
    }
}

/// This subdomain's share of the deflation space together with the
/// replicated coarse operator.
///
/// Global deflation columns are numbered subdomain by subdomain;
/// `col_offsets[p]..col_offsets[p + 1]` are the columns of subdomain `p`.
#[derive(Clone, Debug)]
pub struct DeflationBasis {
    kind: DeflationKind,
    /// Local rows x local columns, row-major.
    zl: DenseMatrix,
    barycenter: Option<[f64; 3]>,
    col_offsets: Vec<usize>,
    rank: usize,
    /// Local rows of `A Z` over all global deflation columns.
    az: CsrMatrix,
    e: DenseMatrix,
    coarse: CoarseSolver,
    factorize_seconds: f64,
}

/// Columns of the local block: ones, then coordinates minus the barycenter
/// for every axis along which the subdomain has nonzero extent.
fn local_block(kind: DeflationKind, n: usize, coords: Option<&[[f64; 3]]>) -> Result<(DenseMatrix, Option<[f64; 3]>)> {
    if n == 0 {
        return Ok((DenseMatrix::zeros(0, 0), None));
    }
    match kind {
        DeflationKind::Constant => Ok((DenseMatrix::from_row_major(n, 1, vec![1.0; n])?, None)),
        DeflationKind::Linear => {
            let coords = coords.ok_or_else(|| Error::config("deflation.kind", "linear deflation needs coordinates"))?;
            if coords.len() != n {
                return Err(Error::dim(format!(
                    "{} coordinates for {n} local unknowns",
                    coords.len()
                )));
            }
            let mut center = [0.0; 3];
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for c in coords {
                for d in 0..3 {
                    center[d] += c[d];
                    lo[d] = lo[d].min(c[d]);
                    hi[d] = hi[d].max(c[d]);
                }
            }
            center.iter_mut().for_each(|c| *c /= n as f64);
            let scale = (0..3).map(|d| lo[d].abs().max(hi[d].abs())).fold(1.0, f64::max);
            // keep an axis only if its centered coordinates add a direction
            // not already spanned (flat or tiny subdomains would make E singular)
            let mut axes = Vec::new();
            let mut kept: Vec<Vec<f64>> = Vec::new();
            for d in 0..3 {
                if hi[d] - lo[d] <= 1e-12 * scale {
                    continue;
                }
                let col: Vec<f64> = coords.iter().map(|c| c[d] - center[d]).collect();
                let norm0 = dot(&col, &col).sqrt();
                let mut q = col;
                for _ in 0..2 {
                    for k in &kept {
                        let h = dot(&q, k);
                        q.iter_mut().zip(k).for_each(|(q, k)| *q -= h * k);
                    }
                }
                let norm = dot(&q, &q).sqrt();
                if norm > 1e-8 * norm0 {
                    q.iter_mut().for_each(|v| *v /= norm);
                    kept.push(q);
                    axes.push(d);
                }
            }
            let k = 1 + axes.len();
            let mut vals = Vec::with_capacity(n * k);
            for c in coords {
                vals.push(1.0);
                vals.extend(axes.iter().map(|&d| c[d] - center[d]));
            }
            Ok((DenseMatrix::from_row_major(n, k, vals)?, Some(center)))
        }
    }
}

impl DeflationBasis {
    /// Collective: builds `Z`, `A Z` and `E = Z^T A Z`, then sets up the
    /// coarse solver (`None` for an exact LU, `Some(tol)` for an inner
    /// iterative solve).
    pub fn build(
        comm: &Communicator,
        view: &SubdomainView,
        kind: DeflationKind,
        coords: Option<&[[f64; 3]]>,
        coarse_tol: Option<f64>,
    ) -> Result<Self> {
        let n = view.nrows_local();
        if view.ncols_local() != n {
            return Err(Error::dim("deflation needs matching row and column partitions"));
        }
        // agree on whether the build can proceed before any further collective
        let local = local_block(kind, n, coords);
        let failed = comm.allreduce_sum(&[if local.is_err() { 1.0 } else { 0.0 }])?[0];
        let (zl, barycenter) = local?;
        if failed > 0.0 {
            return Err(Error::Communicator(
                "deflation basis failed on another subdomain".into(),
            ));
        }

        let k_all = comm.allgather(&[zl.ncols() as f64])?;
        let mut col_offsets = vec![0usize];
        for k in &k_all {
            col_offsets.push(col_offsets.last().unwrap() + *k as usize);
        }
        let ncoarse = *col_offsets.last().unwrap();
        if ncoarse == 0 {
            return Err(Error::Structure("deflation space is empty".into()));
        }
        let kmax = k_all.iter().fold(0.0f64, |a, &b| a.max(b)) as usize;

        // ghost rows of Z: one halo exchange per column slot
        let halo = view.halo();
        let nghost = halo.ghosts().len();
        let mut ghost_z = vec![vec![0.0; kmax]; nghost];
        for s in 0..kmax {
            let v: Vec<f64> = (0..n)
                .map(|i| if s < zl.ncols() { zl.row(i)[s] } else { 0.0 })
                .collect();
            let g = comm.halo_exchange(&v, halo)?;
            for (gz, gv) in ghost_z.iter_mut().zip(g) {
                gz[s] = gv;
            }
        }
        let ghost_owner: Vec<usize> = halo.ghosts().iter().map(|&g| halo.col_partition().owner(g)).collect();

        let rank = comm.rank();
        let my_off = col_offsets[rank];
        let a = view.local_matrix();
        let mut triplets = Vec::new();
        let mut acc = vec![0.0; ncoarse];
        let mut touched = Vec::new();
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let (off, zrow): (usize, &[f64]) = if j < n {
                    (my_off, zl.row(j))
                } else {
                    let g = j - n;
                    let q = ghost_owner[g];
                    (col_offsets[q], &ghost_z[g][..col_offsets[q + 1] - col_offsets[q]])
                };
                for (s, z) in zrow.iter().enumerate() {
                    if acc[off + s] == 0.0 {
                        touched.push(off + s);
                    }
                    acc[off + s] += v * z;
                }
            }
            touched.sort_unstable();
            touched.dedup();
            for &c in &touched {
                if acc[c] != 0.0 {
                    triplets.push((i, c, acc[c]));
                }
                acc[c] = 0.0;
            }
            touched.clear();
        }
        let az = CsrMatrix::from_triplets(n, ncoarse, &triplets)?;

        // my rows of E: Z_l^T (A Z)_l
        let mut e_part = vec![0.0; ncoarse * ncoarse];
        for i in 0..n {
            let (cols, vals) = az.row(i);
            for (s, z) in zl.row(i).iter().enumerate() {
                let row = &mut e_part[(my_off + s) * ncoarse..(my_off + s + 1) * ncoarse];
                for (&c, &v) in cols.iter().zip(vals) {
                    row[c] += z * v;
                }
            }
        }
        comm.allreduce_sum_in_place(&mut e_part)?;
        let e = DenseMatrix::from_row_major(ncoarse, ncoarse, e_part)?;

        let t = Instant::now();
        let coarse = match coarse_tol {
            None => CoarseSolver::Direct(LuFactorization::new(&e)?),
            Some(tol) => CoarseSolver::Iterative {
                e: e.clone(),
                tol,
                maxiter: 4 * ncoarse.max(10),
            },
        };
        let factorize_seconds = t.elapsed().as_secs_f64();

        Ok(Self {
            kind,
            zl,
            barycenter,
            col_offsets,
            rank,
            az,
            e,
            coarse,
            factorize_seconds,
        })
    }

    pub fn kind(&self) -> DeflationKind {
        self.kind
    }

    /// Local block `Z_l`.
    pub fn local_z(&self) -> &DenseMatrix {
        &self.zl
    }

    pub fn barycenter(&self) -> Option<[f64; 3]> {
        self.barycenter
    }

    /// Total number of deflation vectors.
    pub fn ncoarse(&self) -> usize {
        *self.col_offsets.last().unwrap()
    }

    /// Global column range owned by this subdomain.
    pub fn local_columns(&self) -> std::ops::Range<usize> {
        self.col_offsets[self.rank]..self.col_offsets[self.rank + 1]
    }

    pub fn col_offsets(&self) -> &[usize] {
        &self.col_offsets
    }

    /// Local rows of `A Z`.
    pub fn az(&self) -> &CsrMatrix {
        &self.az
    }

    /// The assembled coarse matrix `E = Z^T A Z`.
    pub fn e(&self) -> &DenseMatrix {
        &self.e
    }

    pub fn coarse_solver(&self) -> &CoarseSolver {
        &self.coarse
    }

    /// Wall time spent factorizing `E`.
    pub fn factorize_seconds(&self) -> f64 {
        self.factorize_seconds
    }

    /// Collective `Z^T r` (length `ncoarse`).
    pub fn restrict(&self, comm: &Communicator, r: &[f64]) -> Result<Vec<f64>> {
        let mut t = vec![0.0; self.ncoarse()];
        let off = self.col_offsets[self.rank];
        for s in 0..self.zl.ncols() {
            t[off + s] = (0..r.len()).map(|i| self.zl.row(i)[s] * r[i]).sum();
        }
        comm.allreduce_sum_in_place(&mut t)?;
        Ok(t)
    }

    /// Local part of `Z c` for a replicated coarse vector `c`.
    pub fn prolong(&self, c: &[f64], out: &mut [f64]) {
        let cols = &c[self.local_columns()];
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.zl.row(i), cols);
        }
    }

    /// `E^{-1} Z^T r`, the coarse coefficients of `r`.
    pub fn coarse_coefficients(&self, comm: &Communicator, r: &[f64]) -> Result<Vec<f64>> {
        let t1 = self.restrict(comm, r)?;
        if t1.iter().all(|&v| v == 0.0) {
            return Ok(t1);
        }
        self.coarse.solve(&t1)
    }

    /// Collective projector `r <- (I - A Z E^{-1} Z^T) r`, applied in place.
    pub fn project_in_place(&self, comm: &Communicator, r: &mut [f64]) -> Result<()> {
        if r.len() != self.az.nrows() {
            return Err(Error::dim(format!(
                "projector on {} local rows applied to {} values",
                self.az.nrows(),
                r.len()
            )));
        }
        let t2 = self.coarse_coefficients(comm, r)?;
        if t2.iter().all(|&v| v == 0.0) {
            return Ok(());
        }
        self.az.spmv(-1.0, &t2, 1.0, r)
    }

    /// Collective projector returning a new vector.
    pub fn project(&self, comm: &Communicator, r: &[f64]) -> Result<Vec<f64>> {
        let mut out = r.to_vec();
        self.project_in_place(comm, &mut out)?;
        Ok(out)
    }
}

/// Free-function form of [`DeflationBasis::project`].
pub fn project(comm: &Communicator, basis: &DeflationBasis, r: &[f64]) -> Result<Vec<f64>> {
    basis.project(comm, r)
}

/// Free-function form of [`DeflationBasis::build`] with an exact coarse
/// solver.
pub fn build_basis(
    comm: &Communicator,
    view: &SubdomainView,
    kind: DeflationKind,
    coords: Option<&[[f64; 3]]>,
) -> Result<DeflationBasis> {
    DeflationBasis::build(comm, view, kind, coords, None)
}
