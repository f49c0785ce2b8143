use super::coarsening::{aggregate, smooth_prolongation, strength_graph, tentative_prolongation};
use super::relaxation::{RelaxKind, Smoother};
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::krylov::Preconditioner;
use crate::sparse::{CsrMatrix, DenseMatrix, LuFactorization};

/// Smoothed-aggregation parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AmgParams {
    /// Strength threshold on the finest level; halved on each coarser one.
    pub eps_strong: f64,
    /// Prolongation smoothing weight.
    pub omega: f64,
    pub relax: RelaxKind,
    pub damping: f64,
    /// Levels are added until the operator has at most this many rows.
    pub coarse_enough: usize,
}

impl Default for AmgParams {
    fn default() -> Self {
        Self {
            eps_strong: 0.08,
            omega: 2.0 / 3.0,
            relax: RelaxKind::DampedJacobi,
            damping: 0.8,
            coarse_enough: 500,
        }
    }
}

impl AmgParams {
    /// Reads the AMG subtree rooted at `prefix` (`precond` or
    /// `precond.psolver.local`).
    pub fn from_config(cfg: &SolverConfig, prefix: &str) -> Result<Self> {
        let key = |k: &str| format!("{prefix}.{k}");
        let coarsening = cfg.get_str(&key("coarsening.type"))?;
        if coarsening != "smoothed_aggregation" {
            return Err(Error::config(
                key("coarsening.type"),
                format!("unsupported coarsening `{coarsening}`"),
            ));
        }
        let relax = cfg
            .get_str(&key("relax.type"))?
            .parse()
            .map_err(|e: String| Error::config(key("relax.type"), e))?;
        let damping = cfg.get_f64(&key("relax.damping"))?;
        if !(damping > 0.0 && damping < 2.0) {
            return Err(Error::config(key("relax.damping"), "must lie in (0, 2)"));
        }
        let eps_strong = cfg.get_f64(&key("coarsening.eps_strong"))?;
        if eps_strong < 0.0 {
            return Err(Error::config(key("coarsening.eps_strong"), "must be non-negative"));
        }
        Ok(Self {
            eps_strong,
            omega: cfg.get_f64(&key("coarsening.omega"))?,
            relax,
            damping,
            coarse_enough: cfg.get_usize(&key("coarse_enough"))?,
        })
    }
}

/// One level of the hierarchy: its operator, transfer operators and smoother.
#[derive(Clone, Debug)]
pub struct AmgLevel {
    pub a: CsrMatrix,
    pub p: CsrMatrix,
    pub r: CsrMatrix,
    pub smoother: Smoother,
}

/// Smoothed-aggregation multigrid hierarchy ending in a dense direct solve.
#[derive(Clone, Debug)]
pub struct AmgHierarchy {
    levels: Vec<AmgLevel>,
    coarse_a: CsrMatrix,
    coarse: LuFactorization,
    coarse_enough: usize,
}

impl AmgHierarchy {
    /// Coarsens until the operator is small enough, or until aggregation
    /// stops reducing the size, and factorizes the last operator.
    pub fn build(a: &CsrMatrix, params: &AmgParams) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim(format!(
                "AMG needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let mut levels = Vec::new();
        let mut current = a.clone();
        let mut eps = params.eps_strong;
        while current.nrows() > params.coarse_enough {
            let n = current.nrows();
            let strong = strength_graph(&current, eps)?;
            let agg = aggregate(&strong, &current)?;
            if agg.count == n || agg.count == 0 {
                log::debug!("aggregation stalled at {n} unknowns; solving directly");
                break;
            }
            let p_tent = tentative_prolongation(&agg, n)?;
            let p = smooth_prolongation(&current, &strong, &p_tent, params.omega)?;
            let r = p.transpose();
            let coarse = r.spgemm(&current)?.spgemm(&p)?;
            let smoother = Smoother::new(params.relax, &current, params.damping)?;
            levels.push(AmgLevel {
                a: current,
                p,
                r,
                smoother,
            });
            current = coarse;
            eps *= 0.5;
        }
        let coarse = LuFactorization::new(&current.to_dense())?;
        Ok(Self {
            levels,
            coarse_a: current,
            coarse,
            coarse_enough: params.coarse_enough,
        })
    }

    pub fn levels(&self) -> &[AmgLevel] {
        &self.levels
    }

    /// Operator solved directly at the bottom.
    pub fn coarse_matrix(&self) -> &CsrMatrix {
        &self.coarse_a
    }

    pub fn coarse_enough(&self) -> usize {
        self.coarse_enough
    }

    /// Rows of the finest operator.
    pub fn size(&self) -> usize {
        self.levels.first().map_or(self.coarse_a.nrows(), |l| l.a.nrows())
    }

    /// Operator sizes from finest to coarsest, including the direct level.
    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels
            .iter()
            .map(|l| l.a.nrows())
            .chain(std::iter::once(self.coarse_a.nrows()))
            .collect()
    }

    /// Nonzeros over all levels divided by nonzeros of the finest level.
    pub fn operator_complexity(&self) -> f64 {
        let fine = self.levels.first().map_or(self.coarse_a.nnz(), |l| l.a.nnz());
        let total: usize = self.levels.iter().map(|l| l.a.nnz()).sum::<usize>() + self.coarse_a.nnz();
        total as f64 / fine.max(1) as f64
    }

    /// One V(1,1) cycle for `A x = r` from a zero initial guess.
    pub fn vcycle(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.size() {
            return Err(Error::dim(format!(
                "V-cycle on {} unknowns given {} values",
                self.size(),
                r.len()
            )));
        }
        let mut x = vec![0.0; r.len()];
        self.cycle(0, r, &mut x)?;
        Ok(x)
    }

    fn cycle(&self, level: usize, r: &[f64], x: &mut [f64]) -> Result<()> {
        let Some(lvl) = self.levels.get(level) else {
            x.copy_from_slice(r);
            return self.coarse.solve_in_place(x);
        };
        x.iter_mut().for_each(|v| *v = 0.0);
        lvl.smoother.relax(&lvl.a, r, x);

        let mut res = r.to_vec();
        lvl.a.spmv(-1.0, x, 1.0, &mut res)?;
        let rc = lvl.r.mul_vec(&res)?;
        let mut xc = vec![0.0; rc.len()];
        self.cycle(level + 1, &rc, &mut xc)?;
        lvl.p.spmv(1.0, &xc, 1.0, x)?;

        lvl.smoother.relax(&lvl.a, r, x);
        Ok(())
    }

    /// Dense matrix of the cycle's action on unit vectors.
    pub fn as_dense_operator(&self) -> Result<DenseMatrix> {
        let n = self.size();
        let mut m = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.vcycle(&e)?;
            e[j] = 0.0;
            for i in 0..n {
                m[(i, j)] = col[i];
            }
        }
        Ok(m)
    }
}

/// Free-function form of [`AmgHierarchy::build`] reading `precond.*`.
pub fn build_hierarchy(a: &CsrMatrix, cfg: &SolverConfig) -> Result<AmgHierarchy> {
    AmgHierarchy::build(a, &AmgParams::from_config(cfg, "precond")?)
}

impl Preconditioner for AmgHierarchy {
    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        if r.len() != self.size() || z.len() != self.size() {
            return Err(Error::dim("AMG preconditioner size mismatch"));
        }
        self.cycle(0, r, z)
    }
}
