use std::time::Instant;

use super::blocks::{merge_by_mask, split_by_mask, BlockSystem};
use crate::amg::{AmgParams, RelaxKind, Smoother};
use crate::config::SolverConfig;
use crate::deflation::{collect, DeflatedPreconditioner, DeflationBasis, DeflationKind, LocalAmg, Timings};
use crate::error::{Error, Result};
use crate::krylov::{self, KrylovParams, LinearOperator, Preconditioner, SolveReport, SolverKind};
use crate::runtime::{split_matrix, split_rect, Communicator, Partition, SubdomainView};

/// Parameters of the block solver, read from the `solver` and `precond`
/// subtrees.
#[derive(Clone, Debug, PartialEq)]
pub struct SchurParams {
    /// Outer flexible solver.
    pub outer: KrylovParams,
    /// Velocity solves (steps 1 and 3).
    pub usolver: KrylovParams,
    /// Pressure Schur solve (step 2).
    pub psolver: KrylovParams,
    /// Local AMG inside the pressure preconditioner.
    pub local: AmgParams,
    pub deflation: DeflationKind,
}

impl SchurParams {
    pub fn from_config(cfg: &SolverConfig) -> Result<Self> {
        let mut outer = KrylovParams::from_config(cfg, "solver")?;
        if outer.kind != SolverKind::Fgmres {
            // the preconditioner contains inner Krylov solves, so it varies
            // between applications
            log::warn!(
                "block solver needs a flexible outer method; using fgmres instead of {:?}",
                outer.kind
            );
            outer.kind = SolverKind::Fgmres;
        }
        Ok(Self {
            outer,
            usolver: KrylovParams::from_config(cfg, "precond.usolver.solver")?,
            psolver: KrylovParams::from_config(cfg, "precond.psolver.isolver")?,
            local: AmgParams::from_config(cfg, "precond.psolver.local")?,
            deflation: cfg
                .get_str("precond.psolver.deflation.kind")?
                .parse()
                .map_err(|e: String| Error::config("precond.psolver.deflation.kind", e))?,
        })
    }
}

/// `z = diag(w) r`.
#[derive(Clone, Debug)]
pub struct DiagonalPreconditioner(pub Vec<f64>);

impl Preconditioner for DiagonalPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        z.iter_mut()
            .zip(r.iter().zip(&self.0))
            .for_each(|(z, (r, w))| *z = w * r);
        Ok(())
    }
}

/// One subdomain's rows of every block.
#[derive(Clone, Debug)]
pub struct LocalBlocks {
    pub a: SubdomainView,
    pub k: SubdomainView,
    pub g: SubdomainView,
    pub d: SubdomainView,
    pub s: SubdomainView,
    /// Rows of the explicit `S - D diag(K)^{-1} G`, the matrix the pressure
    /// preconditioner is built from.
    pub s_approx: SubdomainView,
    pub inv_k_diag: Vec<f64>,
    pub mask: Vec<bool>,
    pub pressure_coords: Option<Vec<[f64; 3]>>,
    /// Global pressure count; zero disables step 2.
    pub n_p: usize,
}

/// Distributes a block system over `part` (a partition of the monolithic
/// unknowns).
pub fn distribute_blocks(sys: &BlockSystem, part: &Partition) -> Result<Vec<LocalBlocks>> {
    let (upart, ppart) = sys.block_partitions(part)?;
    let a = split_matrix(&sys.reassemble(), part)?;
    let k = split_matrix(&sys.k, &upart)?;
    let g = split_rect(&sys.g, &upart, &ppart)?;
    let d = split_rect(&sys.d, &ppart, &upart)?;
    let s = split_matrix(&sys.s, &ppart)?;
    let sa = split_matrix(&sys.schur_approximation()?, &ppart)?;
    let mut out = Vec::with_capacity(part.len());
    for (rank, (((((a, k), g), d), s), sa)) in a.into_iter().zip(k).zip(g).zip(d).zip(s).zip(sa).enumerate() {
        out.push(LocalBlocks {
            inv_k_diag: sys.inv_k_diag()[upart.range(rank)].to_vec(),
            mask: sys.mask()[part.range(rank)].to_vec(),
            pressure_coords: sys.pressure_coords().map(|c| c[ppart.range(rank)].to_vec()),
            n_p: sys.n_p(),
            a,
            k,
            g,
            d,
            s,
            s_approx: sa,
        });
    }
    Ok(out)
}

struct Dist<'a>(&'a Communicator, &'a SubdomainView);

impl LinearOperator for Dist<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.1.spmv(self.0, x, y)
    }
}

/// Distributed matrix-free Schur operator.
pub struct DistSchurOperator<'a> {
    comm: &'a Communicator,
    blocks: &'a LocalBlocks,
}

impl LinearOperator for DistSchurOperator<'_> {
    fn apply(&self, p: &[f64], y: &mut [f64]) -> Result<()> {
        let b = self.blocks;
        let mut t = vec![0.0; b.k.nrows_local()];
        b.g.spmv(self.comm, p, &mut t)?;
        t.iter_mut().zip(&b.inv_k_diag).for_each(|(t, d)| *t *= d);
        let mut dt = vec![0.0; y.len()];
        b.d.spmv(self.comm, &t, &mut dt)?;
        b.s.spmv(self.comm, p, y)?;
        y.iter_mut().zip(&dt).for_each(|(y, d)| *y -= d);
        Ok(())
    }
}

/// Per-subdomain block preconditioner: velocity solve, pressure Schur
/// solve, velocity solve.
pub struct SchurPreconditioner<'a> {
    comm: &'a Communicator,
    blocks: &'a LocalBlocks,
    params: SchurParams,
    spai: DiagonalPreconditioner,
    local_amg: LocalAmg,
    basis: Option<DeflationBasis>,
    factorize_seconds: f64,
}

impl<'a> SchurPreconditioner<'a> {
    /// Collective setup.
    pub fn setup(comm: &'a Communicator, blocks: &'a LocalBlocks, params: SchurParams) -> Result<Self> {
        let kb = blocks.k.local_block();
        let spai = if kb.nrows() == 0 {
            DiagonalPreconditioner(Vec::new())
        } else {
            DiagonalPreconditioner(Smoother::new(RelaxKind::Spai0, &kb, 0.8)?.weights().to_vec())
        };
        let (local_amg, basis) = if blocks.n_p == 0 {
            (
                LocalAmg::build(&crate::sparse::CsrMatrix::zeros(0, 0), &params.local)?,
                None,
            )
        } else {
            let amg = LocalAmg::build(&blocks.s_approx.local_block(), &params.local)?;
            let basis = DeflationBasis::build(
                comm,
                &blocks.s_approx,
                params.deflation,
                blocks.pressure_coords.as_deref(),
                None,
            )?;
            (amg, Some(basis))
        };
        let factorize_seconds = basis.as_ref().map_or(0.0, |b| b.factorize_seconds());
        Ok(Self {
            comm,
            blocks,
            params,
            spai,
            local_amg,
            basis,
            factorize_seconds,
        })
    }

    pub fn factorize_seconds(&self) -> f64 {
        self.factorize_seconds
    }

    fn velocity_solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut u = vec![0.0; rhs.len()];
        let rep = krylov::solve(
            self.comm,
            &Dist(self.comm, &self.blocks.k),
            &self.spai,
            rhs,
            &mut u,
            &self.params.usolver,
        )?;
        log::trace!(
            "velocity solve: {} iterations, residual {:e}",
            rep.iterations,
            rep.relative_residual
        );
        Ok(u)
    }

    /// Applies the three steps to `(b_u, b_p)` (local parts).
    pub fn apply_blocks(&self, bu: &[f64], bp: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let b = self.blocks;
        // 1. K u_hat = b_u (with p = 0)
        let u_hat = self.velocity_solve(bu)?;
        let Some(basis) = &self.basis else {
            return Ok((u_hat, Vec::new()));
        };
        // 2. (S - D diag(K)^{-1} G) p = b_p - D u_hat
        let mut rhs_p = vec![0.0; bp.len()];
        b.d.spmv(self.comm, &u_hat, &mut rhs_p)?;
        rhs_p.iter_mut().zip(bp).for_each(|(r, b)| *r = b - *r);
        let op = DistSchurOperator {
            comm: self.comm,
            blocks: b,
        };
        let prec = DeflatedPreconditioner {
            comm: self.comm,
            basis,
            local: &self.local_amg,
        };
        let mut p = vec![0.0; bp.len()];
        let rep = krylov::solve(self.comm, &op, &prec, &rhs_p, &mut p, &self.params.psolver)?;
        log::trace!(
            "pressure solve: {} iterations, residual {:e}",
            rep.iterations,
            rep.relative_residual
        );
        // 3. K u = b_u - G p
        let mut rhs_u = vec![0.0; bu.len()];
        b.g.spmv(self.comm, &p, &mut rhs_u)?;
        rhs_u.iter_mut().zip(bu).for_each(|(r, b)| *r = b - *r);
        let u = self.velocity_solve(&rhs_u)?;
        Ok((u, p))
    }
}

impl Preconditioner for SchurPreconditioner<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        let (ru, rp) = split_by_mask(&self.blocks.mask, r);
        let (u, p) = self.apply_blocks(&ru, &rp)?;
        z.copy_from_slice(&merge_by_mask(&self.blocks.mask, &u, &p));
        Ok(())
    }
}

/// One application of the block preconditioner to `(b_u, b_p)`.
pub fn apply_schur_preconditioner(
    sys: &BlockSystem,
    bu: &[f64],
    bp: &[f64],
    part: &Partition,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if bu.len() != sys.n_u() || bp.len() != sys.n_p() {
        return Err(Error::dim("right-hand side parts do not match the blocks"));
    }
    let params = SchurParams::from_config(cfg)?;
    let blocks = distribute_blocks(sys, part)?;
    let (upart, ppart) = sys.block_partitions(part)?;
    let out = Communicator::run(part.len(), cfg.threads()?, |comm| {
        let r = comm.rank();
        let pc = SchurPreconditioner::setup(comm, &blocks[r], params.clone())?;
        pc.apply_blocks(&bu[upart.range(r)], &bp[ppart.range(r)])
    })?;
    let (us, ps): (Vec<_>, Vec<_>) = collect(out)?.into_iter().unzip();
    Ok((upart.assemble(&us)?, ppart.assemble(&ps)?))
}

/// Result of a block solve gathered on the controller.
#[derive(Clone, Debug)]
pub struct BlockRun {
    pub x: Vec<f64>,
    pub report: SolveReport,
    pub timings: Timings,
}

/// Outer FGMRES on the monolithic system, right-preconditioned by the
/// block preconditioner, one worker per subdomain of `part`.
pub fn solve_block_system(sys: &BlockSystem, b: &[f64], part: &Partition, cfg: &SolverConfig) -> Result<BlockRun> {
    if b.len() != sys.n() {
        return Err(Error::dim(format!(
            "{} right-hand side entries for {} unknowns",
            b.len(),
            sys.n()
        )));
    }
    let params = SchurParams::from_config(cfg)?;
    let blocks = distribute_blocks(sys, part)?;
    let out = Communicator::run(part.len(), cfg.threads()?, |comm| {
        let r = comm.rank();
        let start = Instant::now();
        let pc = SchurPreconditioner::setup(comm, &blocks[r], params.clone())?;
        let setup_s = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let bl = &b[part.range(r)];
        let mut x = vec![0.0; bl.len()];
        let rep = krylov::solve(comm, &Dist(comm, &blocks[r].a), &pc, bl, &mut x, &params.outer)?;
        let t = Timings {
            setup_s,
            factorize_e_s: pc.factorize_seconds(),
            solve_s: start.elapsed().as_secs_f64(),
        };
        Ok((x, rep, t))
    })?;
    let mut pieces = Vec::new();
    let mut report = None;
    let mut timings = Timings::default();
    for (x, rep, t) in collect(out)? {
        pieces.push(x);
        report.get_or_insert(rep);
        timings.setup_s = timings.setup_s.max(t.setup_s);
        timings.factorize_e_s = timings.factorize_e_s.max(t.factorize_e_s);
        timings.solve_s = timings.solve_s.max(t.solve_s);
    }
    Ok(BlockRun {
        x: part.assemble(&pieces)?,
        report: report.expect("at least one subdomain"),
        timings,
    })
}
