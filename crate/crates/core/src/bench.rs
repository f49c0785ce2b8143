//! Weak/strong scaling sweeps on the Poisson problem.

use std::io::Write;

use serde::Serialize;

use crate::config::SolverConfig;
use crate::deflation::{run_deflated, DeflationKind, DeflationMode};
use crate::error::{Error, Result};
use crate::problems::{gen_poisson3d, GridSpec};

/// Largest problem a sweep will generate.
pub const MAX_UNKNOWNS: usize = 1 << 24;

pub const BENCH_CSV_HEADER: &str = "subdomains,threads,setup_s,factorize_E_s,solve_s,iters,converged";
pub const COMPARE_CSV_HEADER: &str = "subdomains,unknowns,deflated_iters,local_iters";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    /// Grid grows with the subdomain count; `base` is the per-subdomain
    /// edge length.
    Weak,
    /// Fixed `base^3` grid.
    Strong,
}

impl std::str::FromStr for BenchMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "weak" => Ok(Self::Weak),
            "strong" => Ok(Self::Strong),
            other => Err(format!("unknown bench mode `{other}` (expected weak or strong)")),
        }
    }
}

/// Near-cubic factorization `mx * my * mz = m` with `mx >= my >= mz`.
pub fn factor3(m: usize) -> [usize; 3] {
    let mut best = [m, 1, 1];
    let mut best_spread = m;
    for mz in 1..=m {
        if mz * mz * mz > m {
            break;
        }
        if !m.is_multiple_of(mz) {
            continue;
        }
        let rest = m / mz;
        for my in mz..=rest {
            if my * my > rest {
                break;
            }
            if !rest.is_multiple_of(my) {
                continue;
            }
            let mx = rest / my;
            if mx - mz < best_spread {
                best_spread = mx - mz;
                best = [mx, my, mz];
            }
        }
    }
    best
}

/// Grid and box layout of one sweep point.
pub fn sweep_grid(mode: BenchMode, base: usize, m: usize) -> Result<(GridSpec, [usize; 3])> {
    if base == 0 || m == 0 {
        return Err(Error::config("bench", "grid size and subdomain count must be positive"));
    }
    let boxes = factor3(m);
    let grid = match mode {
        BenchMode::Weak => GridSpec::new(base * boxes[0], base * boxes[1], base * boxes[2])?,
        BenchMode::Strong => GridSpec::cube(base)?,
    };
    if boxes.iter().zip(grid.dims()).any(|(b, n)| *b > n) {
        return Err(Error::config(
            "bench",
            format!(
                "{m} subdomains ({}x{}x{}) do not fit a {}^3 grid",
                boxes[0], boxes[1], boxes[2], base
            ),
        ));
    }
    if grid.npoints() > MAX_UNKNOWNS {
        return Err(Error::config(
            "bench",
            format!("{} unknowns exceed the limit of {MAX_UNKNOWNS}", grid.npoints()),
        ));
    }
    Ok((grid, boxes))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub kind: DeflationKind,
    pub subdomains: usize,
    pub unknowns: usize,
    pub threads: usize,
    pub setup_s: f64,
    pub factorize_e_s: f64,
    pub solve_s: f64,
    pub iters: usize,
    pub converged: bool,
}

/// One deflated solve per `(kind, subdomain count)`, kinds outermost.
pub fn run_bench(
    mode: BenchMode,
    base: usize,
    subdomains: &[usize],
    kinds: &[DeflationKind],
    cfg: &SolverConfig,
) -> Result<Vec<BenchRow>> {
    // validate every size before spending time on any solve
    for &m in subdomains {
        sweep_grid(mode, base, m)?;
    }
    let threads = cfg.threads()?;
    let mut rows = Vec::new();
    for &kind in kinds {
        let mut cfg = cfg.clone();
        cfg.set("deflation.kind", serde_json::json!(kind.to_string()))?;
        for &m in subdomains {
            let (grid, boxes) = sweep_grid(mode, base, m)?;
            let p = gen_poisson3d(&grid, boxes)?;
            let mode = if cfg.get_bool("deflation.inexact")? {
                DeflationMode::Inexact
            } else {
                DeflationMode::Exact
            };
            let run = run_deflated(&p.a, &p.b, &p.partition, p.coords(), &cfg, mode)?;
            log::info!(
                "{kind} m={m} n={}: {} iterations, residual {:.2e}",
                p.a.nrows(),
                run.report.iterations,
                run.report.relative_residual
            );
            rows.push(BenchRow {
                kind,
                subdomains: m,
                unknowns: p.a.nrows(),
                threads,
                setup_s: run.timings.setup_s,
                factorize_e_s: run.timings.factorize_e_s,
                solve_s: run.timings.solve_s,
                iters: run.report.iterations,
                converged: run.report.converged,
            });
        }
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(mut w: W, rows: &[BenchRow]) -> Result<()> {
    writeln!(w, "{BENCH_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.6},{:.6},{:.6},{},{}",
            r.subdomains, r.threads, r.setup_s, r.factorize_e_s, r.solve_s, r.iters, r.converged
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub subdomains: usize,
    pub unknowns: usize,
    pub deflated_iters: usize,
    pub local_iters: usize,
    pub deflated_converged: bool,
    pub local_converged: bool,
}

/// Weak sweep comparing deflation + local AMG against local AMG alone.
pub fn compare_deflation(base: usize, subdomains: &[usize], cfg: &SolverConfig) -> Result<Vec<CompareRow>> {
    for &m in subdomains {
        sweep_grid(BenchMode::Weak, base, m)?;
    }
    let mut rows = Vec::new();
    for &m in subdomains {
        let (grid, boxes) = sweep_grid(BenchMode::Weak, base, m)?;
        let p = gen_poisson3d(&grid, boxes)?;
        let d = run_deflated(&p.a, &p.b, &p.partition, p.coords(), cfg, DeflationMode::Exact)?;
        let l = run_deflated(&p.a, &p.b, &p.partition, None, cfg, DeflationMode::None)?;
        log::info!(
            "m={m} n={}: deflated {} iterations, local {} iterations",
            p.a.nrows(),
            d.report.iterations,
            l.report.iterations
        );
        rows.push(CompareRow {
            subdomains: m,
            unknowns: p.a.nrows(),
            deflated_iters: d.report.iterations,
            local_iters: l.report.iterations,
            deflated_converged: d.report.converged,
            local_converged: l.report.converged,
        });
    }
    Ok(rows)
}

pub fn write_compare_csv<W: Write>(mut w: W, rows: &[CompareRow]) -> Result<()> {
    writeln!(w, "{COMPARE_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.subdomains, r.unknowns, r.deflated_iters, r.local_iters
        )?;
    }
    Ok(())
}
