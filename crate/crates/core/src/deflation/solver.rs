use std::time::Instant;

use serde::Serialize;

use super::basis::{DeflationBasis, DeflationKind};
use crate::amg::{AmgHierarchy, AmgParams};
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::krylov::{self, KrylovParams, LinearOperator, Preconditioner, SolveReport, SolverKind};
use crate::runtime::{Communicator, Partition, Reduce, SubdomainView};
use crate::sparse::{axpy, dot};

/// Deflation settings read from `deflation.*`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeflationOptions {
    pub kind: DeflationKind,
    pub inexact: bool,
    pub coarse_tol: f64,
}

impl Default for DeflationOptions {
    fn default() -> Self {
        Self {
            kind: DeflationKind::Constant,
            inexact: false,
            coarse_tol: 1e-8,
        }
    }
}

impl DeflationOptions {
    pub fn from_config(cfg: &SolverConfig) -> Result<Self> {
        let kind = cfg
            .get_str("deflation.kind")?
            .parse()
            .map_err(|e: String| Error::config("deflation.kind", e))?;
        let coarse_tol = cfg.get_f64("deflation.coarse_tol")?;
        if !(coarse_tol > 0.0) {
            return Err(Error::config("deflation.coarse_tol", "must be positive"));
        }
        Ok(Self {
            kind,
            inexact: cfg.get_bool("deflation.inexact")?,
            coarse_tol,
        })
    }
}

/// Which formulation a [`DeflatedSolver`] uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeflationMode {
    /// Krylov on the projected system `P A y = P b`, exact `E^{-1}`,
    /// followed by the coarse correction `x = y + Z lambda`.
    Exact,
    /// FGMRES on `A x = b` with the projector combined multiplicatively with
    /// the local preconditioner and `E^{-1}` replaced by an inner solve.
    Inexact,
    /// Block-local preconditioning only, no coarse space.
    None,
}

/// Wall-clock phases of one distributed solve, in seconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Timings {
    /// Deflation basis, `A Z`, `E` and local AMG setup; includes
    /// `factorize_e_s`.
    pub setup_s: f64,
    pub factorize_e_s: f64,
    pub solve_s: f64,
}

impl Timings {
    fn max(self, o: Timings) -> Timings {
        Timings {
            setup_s: self.setup_s.max(o.setup_s),
            factorize_e_s: self.factorize_e_s.max(o.factorize_e_s),
            solve_s: self.solve_s.max(o.solve_s),
        }
    }
}

/// A distributed matrix as a collective linear operator.
pub struct DistMatrix<'a> {
    pub comm: &'a Communicator,
    pub view: &'a SubdomainView,
}

impl LinearOperator for DistMatrix<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.view.spmv(self.comm, x, y)
    }
}

/// `P A`: the operator of the deflated system.
pub struct ProjectedOperator<'a> {
    pub a: DistMatrix<'a>,
    pub basis: &'a DeflationBasis,
}

impl LinearOperator for ProjectedOperator<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.a.apply(x, y)?;
        self.basis.project_in_place(self.a.comm, y)
    }
}

/// Local AMG on the diagonal block; a no-op on empty subdomains.
#[derive(Clone, Debug)]
pub struct LocalAmg(Option<AmgHierarchy>);

impl LocalAmg {
    pub fn build(block: &crate::sparse::CsrMatrix, params: &AmgParams) -> Result<Self> {
        if block.nrows() == 0 {
            return Ok(Self(None));
        }
        Ok(Self(Some(AmgHierarchy::build(block, params)?)))
    }

    pub fn hierarchy(&self) -> Option<&AmgHierarchy> {
        self.0.as_ref()
    }
}

impl Preconditioner for LocalAmg {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        match &self.0 {
            Some(h) => h.apply(r, z),
            None => Ok(()),
        }
    }
}

/// Deflation as a right preconditioner combined multiplicatively with a
/// local one: `z = Z c + M (r - A Z c)`, `c = E^{-1} Z^T r`.
pub struct DeflatedPreconditioner<'a, M: ?Sized> {
    pub comm: &'a Communicator,
    pub basis: &'a DeflationBasis,
    pub local: &'a M,
}

impl<M: Preconditioner + ?Sized> Preconditioner for DeflatedPreconditioner<'_, M> {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        let c = self.basis.coarse_coefficients(self.comm, r)?;
        let mut q = r.to_vec();
        self.basis.az().spmv(-1.0, &c, 1.0, &mut q)?;
        self.local.apply(&q, z)?;
        let mut zc = vec![0.0; r.len()];
        self.basis.prolong(&c, &mut zc);
        axpy(1.0, &zc, z);
        Ok(())
    }
}

/// Per-subdomain state of a deflated solve.
pub struct DeflatedSolver<'a> {
    comm: &'a Communicator,
    view: &'a SubdomainView,
    basis: Option<DeflationBasis>,
    local: LocalAmg,
    params: KrylovParams,
    mode: DeflationMode,
    timings: Timings,
}

impl<'a> DeflatedSolver<'a> {
    /// Collective setup. `coords` are the coordinates of the local rows
    /// (needed for linear deflation only).
    pub fn setup(
        comm: &'a Communicator,
        view: &'a SubdomainView,
        coords: Option<&[[f64; 3]]>,
        cfg: &SolverConfig,
        mode: DeflationMode,
    ) -> Result<Self> {
        let opts = DeflationOptions::from_config(cfg)?;
        let amg = AmgParams::from_config(cfg, "precond")?;
        let mut params = KrylovParams::from_config(cfg, "solver")?;
        if mode == DeflationMode::Inexact {
            params.kind = SolverKind::Fgmres;
        }

        let start = Instant::now();
        let basis = match mode {
            DeflationMode::None => None,
            DeflationMode::Exact => Some(DeflationBasis::build(comm, view, opts.kind, coords, None)?),
            DeflationMode::Inexact => Some(DeflationBasis::build(
                comm,
                view,
                opts.kind,
                coords,
                Some(opts.coarse_tol),
            )?),
        };
        let local = LocalAmg::build(&view.local_block(), &amg);
        // keep peers from blocking on a collective this rank will never reach
        let failed = comm.allreduce_sum(&[if local.is_err() { 1.0 } else { 0.0 }])?[0];
        let local = local?;
        if failed > 0.0 {
            return Err(Error::Communicator(
                "local AMG setup failed on another subdomain".into(),
            ));
        }
        let timings = Timings {
            setup_s: start.elapsed().as_secs_f64(),
            factorize_e_s: basis.as_ref().map_or(0.0, |b| b.factorize_seconds()),
            solve_s: 0.0,
        };
        Ok(Self {
            comm,
            view,
            basis,
            local,
            params,
            mode,
            timings,
        })
    }

    pub fn basis(&self) -> Option<&DeflationBasis> {
        self.basis.as_ref()
    }

    pub fn local_preconditioner(&self) -> &LocalAmg {
        &self.local
    }

    pub fn params(&self) -> &KrylovParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut KrylovParams {
        &mut self.params
    }

    pub fn mode(&self) -> DeflationMode {
        self.mode
    }

    pub fn timings(&self) -> Timings {
        self.timings
    }

    /// Collective solve for the local part of `x`, starting from zero.
    pub fn solve(&mut self, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        let n = self.view.nrows_local();
        if b.len() != n {
            return Err(Error::dim(format!(
                "{} right-hand side entries for {n} local rows",
                b.len()
            )));
        }
        let start = Instant::now();
        let comm = self.comm;
        let a = DistMatrix { comm, view: self.view };
        let mut x = vec![0.0; n];
        let report = match (&self.basis, self.mode) {
            (Some(basis), DeflationMode::Exact) => {
                let bnorm = comm.sum_scalar(dot(b, b))?.sqrt();
                if bnorm == 0.0 {
                    SolveReport::trivial()
                } else {
                    let pb = basis.project(comm, b)?;
                    let pbnorm = comm.sum_scalar(dot(&pb, &pb))?.sqrt();
                    let mut y = vec![0.0; n];
                    let mut iterations = 0;
                    let mut breakdown = None;
                    if pbnorm > 0.0 {
                        // the projected residual equals the true residual of
                        // the corrected solution, so rescale to ||b||
                        let mut inner = self.params.clone();
                        inner.tol = self.params.tol * bnorm / pbnorm;
                        let op = ProjectedOperator {
                            a: DistMatrix { comm, view: self.view },
                            basis,
                        };
                        let rep = krylov::solve(comm, &op, &self.local, &pb, &mut y, &inner)?;
                        iterations = rep.iterations;
                        breakdown = rep.breakdown;
                    }
                    // x = y + Z E^{-1} Z^T (b - A y)
                    let mut r = vec![0.0; n];
                    a.apply(&y, &mut r)?;
                    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
                    let lambda = basis.coarse_coefficients(comm, &r)?;
                    basis.prolong(&lambda, &mut x);
                    axpy(1.0, &y, &mut x);
                    krylov::finish(comm, &a, b, &x, bnorm, iterations, self.params.tol, breakdown)?
                }
            }
            (Some(basis), _) => {
                let m = DeflatedPreconditioner {
                    comm,
                    basis,
                    local: &self.local,
                };
                krylov::solve(comm, &a, &m, b, &mut x, &self.params)?
            }
            (None, _) => krylov::solve(comm, &a, &self.local, b, &mut x, &self.params)?,
        };
        self.timings.solve_s = start.elapsed().as_secs_f64();
        Ok((x, report))
    }
}

/// Result of a distributed solve gathered on the controller.
#[derive(Clone, Debug)]
pub struct DeflatedRun {
    pub x: Vec<f64>,
    pub report: SolveReport,
    /// Maximum over subdomains.
    pub timings: Timings,
}

/// Picks the most informative error from per-rank results: a rank's own
/// failure rather than the "peer left" errors it caused elsewhere.
pub(crate) fn collect<R>(results: Vec<Result<R>>) -> Result<Vec<R>> {
    if results.iter().all(|r| r.is_ok()) {
        return Ok(results.into_iter().map(|r| r.ok().unwrap()).collect());
    }
    let mut first = None;
    for r in results {
        if let Err(e) = r {
            if !matches!(e, Error::Communicator(_)) {
                return Err(e);
            }
            first.get_or_insert(e);
        }
    }
    Err(first.unwrap())
}

pub(crate) fn check_problem(
    a: &crate::sparse::CsrMatrix,
    b: &[f64],
    part: &Partition,
    coords: Option<&[[f64; 3]]>,
) -> Result<()> {
    if !a.is_square() {
        return Err(Error::dim(format!(
            "matrix is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.len() != a.nrows() || part.nglobal() != a.nrows() {
        return Err(Error::dim(format!(
            "matrix has {} rows, right-hand side {}, partition {}",
            a.nrows(),
            b.len(),
            part.nglobal()
        )));
    }
    if let Some(c) = coords {
        if c.len() != a.nrows() {
            return Err(Error::dim(format!(
                "{} coordinates for {} unknowns",
                c.len(),
                a.nrows()
            )));
        }
    }
    Ok(())
}

/// Runs one distributed solve with one worker per subdomain of `part`.
pub fn run_deflated(
    a: &crate::sparse::CsrMatrix,
    b: &[f64],
    part: &Partition,
    coords: Option<&[[f64; 3]]>,
    cfg: &SolverConfig,
    mode: DeflationMode,
) -> Result<DeflatedRun> {
    check_problem(a, b, part, coords)?;
    let views = crate::runtime::split_matrix(a, part)?;
    let threads = cfg.threads()?;
    let results = Communicator::run(part.len(), threads, |comm| {
        let view = &views[comm.rank()];
        let rows = view.rows();
        let local_coords = coords.map(|c| &c[rows.clone()]);
        let mut solver = DeflatedSolver::setup(comm, view, local_coords, cfg, mode)?;
        let (x, report) = solver.solve(&b[rows])?;
        Ok((x, report, solver.timings()))
    })?;
    let results = collect(results)?;
    let mut pieces = Vec::with_capacity(results.len());
    let mut timings = Timings::default();
    let mut report = None;
    for (x, rep, t) in results {
        pieces.push(x);
        timings = timings.max(t);
        report.get_or_insert(rep);
    }
    Ok(DeflatedRun {
        x: part.assemble(&pieces)?,
        report: report.expect("at least one subdomain"),
        timings,
    })
}

fn mode_from_config(cfg: &SolverConfig) -> Result<DeflationMode> {
    Ok(if cfg.get_bool("deflation.inexact")? {
        DeflationMode::Inexact
    } else {
        DeflationMode::Exact
    })
}

/// Solves `A x = b` with subdomain deflation and block-local AMG. The mode
/// (exact or inexact coarse solve) follows `deflation.inexact`.
pub fn solve_deflated(
    a: &crate::sparse::CsrMatrix,
    b: &[f64],
    part: &Partition,
    coords: Option<&[[f64; 3]]>,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let run = run_deflated(a, b, part, coords, cfg, mode_from_config(cfg)?)?;
    Ok((run.x, run.report))
}

/// Inexact coarse solves to `deflation.coarse_tol` under an FGMRES outer
/// iteration.
pub fn solve_inexact_deflated(
    a: &crate::sparse::CsrMatrix,
    b: &[f64],
    part: &Partition,
    coords: Option<&[[f64; 3]]>,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let run = run_deflated(a, b, part, coords, cfg, DeflationMode::Inexact)?;
    Ok((run.x, run.report))
}

/// Same Krylov method and local AMG, no coarse space.
pub fn solve_block_local(
    a: &crate::sparse::CsrMatrix,
    b: &[f64],
    part: &Partition,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let run = run_deflated(a, b, part, None, cfg, DeflationMode::None)?;
    Ok((run.x, run.report))
}
