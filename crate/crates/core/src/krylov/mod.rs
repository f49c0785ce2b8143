//! Krylov solvers written against a [`Reduce`] collective so the same code
//! runs serially or as one participant of a distributed solve.
//!
//! All solvers use right preconditioning, start from the `x` passed in,
//! and stop on `||b - A x|| <= tol * ||b||`. The reported residual is always
//! recomputed from the final iterate rather than taken from a recurrence.

mod bicgstabl;
mod cg;
mod gmres;

use std::str::FromStr;

use serde::Serialize;

pub use bicgstabl::{bicgstab2, bicgstabl};
pub use cg::cg;
pub use gmres::{fgmres, gmres};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::runtime::Reduce;
use crate::sparse::{dot, CsrMatrix};

/// Iterations between recomputations of the true residual.
pub const RESIDUAL_REFRESH: usize = 50;

/// A linear map applied to (local parts of) vectors.
pub trait LinearOperator {
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

/// Right preconditioner `z = M r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()>;
}

impl LinearOperator for CsrMatrix {
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.spmv(1.0, x, 0.0, y)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        (**self).apply(x, y)
    }
}

impl<T: Preconditioner + ?Sized> Preconditioner for &T {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        (**self).apply(r, z)
    }
}

/// `M = I`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        z.copy_from_slice(r);
        Ok(())
    }
}

/// Adapts a closure into a [`LinearOperator`].
pub struct FnOperator<F>(pub F);

impl<F: Fn(&[f64], &mut [f64]) -> Result<()>> LinearOperator for FnOperator<F> {
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        (self.0)(x, y)
    }
}

/// Adapts a closure into a [`Preconditioner`].
pub struct FnPreconditioner<F>(pub F);

impl<F: Fn(&[f64], &mut [f64]) -> Result<()>> Preconditioner for FnPreconditioner<F> {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        (self.0)(r, z)
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `||b - A x|| / ||b||` recomputed from the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<String>,
}

impl SolveReport {
    pub(crate) fn trivial() -> Self {
        Self {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            breakdown: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Cg,
    BiCgStab2,
    Gmres,
    Fgmres,
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cg" => Ok(Self::Cg),
            "bicgstab2" | "bicgstabl" => Ok(Self::BiCgStab2),
            "gmres" => Ok(Self::Gmres),
            "fgmres" => Ok(Self::Fgmres),
            other => Err(format!(
                "unknown solver `{other}` (expected cg, bicgstab2, gmres or fgmres)"
            )),
        }
    }
}

/// Stopping and restart parameters shared by all solvers.
#[derive(Clone, Debug, PartialEq)]
pub struct KrylovParams {
    pub kind: SolverKind,
    pub tol: f64,
    pub maxiter: usize,
    /// GMRES restart length (`M` in the configuration tree).
    pub restart: usize,
}

impl Default for KrylovParams {
    fn default() -> Self {
        Self {
            kind: SolverKind::BiCgStab2,
            tol: 1e-6,
            maxiter: 500,
            restart: 50,
        }
    }
}

impl KrylovParams {
    pub fn new(kind: SolverKind, tol: f64, maxiter: usize) -> Self {
        Self {
            kind,
            tol,
            maxiter,
            restart: 50,
        }
    }

    pub fn with_restart(mut self, restart: usize) -> Self {
        self.restart = restart;
        self
    }

    /// Reads `{prefix}.type`, `.tol`, `.maxiter` and `.M`.
    pub fn from_config(cfg: &SolverConfig, prefix: &str) -> Result<Self> {
        let key = |k: &str| format!("{prefix}.{k}");
        let kind = cfg
            .get_str(&key("type"))?
            .parse()
            .map_err(|e: String| Error::config(key("type"), e))?;
        let tol = cfg.get_f64(&key("tol"))?;
        if !(tol > 0.0) {
            return Err(Error::config(key("tol"), "must be positive"));
        }
        let restart = cfg.get_usize(&key("M"))?;
        if restart == 0 {
            return Err(Error::config(key("M"), "restart length must be at least 1"));
        }
        Ok(Self {
            kind,
            tol,
            maxiter: cfg.get_usize(&key("maxiter"))?,
            restart,
        })
    }
}

/// Runs the solver selected by `params.kind`.
pub fn solve<A, M>(
    red: &dyn Reduce,
    a: &A,
    m: &M,
    b: &[f64],
    x: &mut [f64],
    params: &KrylovParams,
) -> Result<SolveReport>
where
    A: LinearOperator + ?Sized,
    M: Preconditioner + ?Sized,
{
    match params.kind {
        SolverKind::Cg => cg(red, a, m, b, x, params),
        SolverKind::BiCgStab2 => bicgstab2(red, a, m, b, x, params),
        SolverKind::Gmres => gmres(red, a, m, b, x, params),
        SolverKind::Fgmres => fgmres(red, a, m, b, x, params),
    }
}

pub(crate) fn global_dot(red: &dyn Reduce, x: &[f64], y: &[f64]) -> Result<f64> {
    red.sum_scalar(dot(x, y))
}

pub(crate) fn global_norm(red: &dyn Reduce, x: &[f64]) -> Result<f64> {
    Ok(global_dot(red, x, x)?.sqrt())
}

/// `r = b - A x`.
pub(crate) fn residual<A: LinearOperator + ?Sized>(a: &A, b: &[f64], x: &[f64], r: &mut [f64]) -> Result<()> {
    a.apply(x, r)?;
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    Ok(())
}

pub(crate) fn check_sizes(b: &[f64], x: &[f64]) -> Result<()> {
    if b.len() != x.len() {
        return Err(Error::dim(format!(
            "right-hand side has {} entries, solution {}",
            b.len(),
            x.len()
        )));
    }
    Ok(())
}

/// Final report from a freshly computed residual.
pub(crate) fn finish<A: LinearOperator + ?Sized>(
    red: &dyn Reduce,
    a: &A,
    b: &[f64],
    x: &[f64],
    bnorm: f64,
    iterations: usize,
    tol: f64,
    breakdown: Option<String>,
) -> Result<SolveReport> {
    let mut r = vec![0.0; b.len()];
    residual(a, b, x, &mut r)?;
    let rel = global_norm(red, &r)? / bnorm;
    Ok(SolveReport {
        iterations,
        relative_residual: rel,
        converged: rel <= tol,
        breakdown,
    })
}

#[cfg(test)]
pub(crate) mod testing {
    use crate::sparse::CsrMatrix;

    pub fn poisson1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    /// Deterministic nonsymmetric diagonally dominant matrix.
    pub fn dominant(n: usize, seed: u64) -> CsrMatrix {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64) / ((1u64 << 31) as f64) - 0.5
        };
        let mut t = Vec::new();
        for i in 0..n {
            let mut off = 0.0;
            for j in 0..n {
                if i != j && next() > 0.3 {
                    let v = next();
                    off += v.abs();
                    t.push((i, j, v));
                }
            }
            t.push((i, i, off + 1.0 + next().abs()));
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }
}
