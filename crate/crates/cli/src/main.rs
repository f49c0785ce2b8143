use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use deflamg::bench::{compare_deflation, factor3, run_bench, write_bench_csv, write_compare_csv, BenchMode};
use deflamg::deflation::{run_deflated, DeflationKind, DeflationMode};
use deflamg::problems::{
    gen_poisson3d, gen_saddle_point, read_mask, read_matrix_market, read_vector, write_vector, GridSpec,
};
use deflamg::runtime::Partition;
use deflamg::schur::{solve_block_system, split_blocks};
use deflamg::SolverConfig;

/// Subdomain-deflated Krylov solvers with local smoothed-aggregation AMG.
///
/// Settings are taken from the built-in defaults, then the `--config`
/// file, then command-line flags (flags win).
///
/// Exit status: 0 converged, 1 not converged, 2 usage, input or setup error.
#[derive(Parser)]
#[command(name = "deflamg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one system and print the report as JSON.
    Solve(SolveArgs),
    /// Weak or strong scaling sweep on the Poisson problem (CSV).
    Bench(BenchArgs),
    /// Deflation + local AMG against local AMG alone, weak sweep (CSV).
    CompareDeflation(CompareArgs),
    /// Print the merged configuration tree.
    PrintConfig(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Relative residual tolerance (overrides solver.tol).
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads per subdomain (overrides runtime.threads).
    #[arg(long)]
    threads: Option<usize>,
    /// Deflation basis (overrides deflation.kind).
    #[arg(long, value_name = "constant|linear")]
    deflation: Option<DeflationKind>,
}

impl Common {
    fn load(&self) -> anyhow::Result<SolverConfig> {
        let mut cfg = match &self.config {
            Some(p) => SolverConfig::from_file(p)?,
            None => SolverConfig::default(),
        };
        if let Some(t) = self.tol {
            cfg.set("solver.tol", json!(t))?;
        }
        if let Some(t) = self.threads {
            cfg.set("runtime.threads", json!(t))?;
        }
        if let Some(k) = self.deflation {
            cfg.set("deflation.kind", json!(k.to_string()))?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Generate an N^3 Poisson problem.
    #[arg(long, value_name = "N", conflicts_with_all = ["saddle", "matrix"])]
    poisson: Option<usize>,
    /// Generate an N^3-node saddle-point problem (solved with the Schur preconditioner).
    #[arg(long, value_name = "N", conflicts_with = "matrix")]
    saddle: Option<usize>,
    /// MatrixMarket system matrix.
    #[arg(long, value_name = "PATH", requires = "rhs")]
    matrix: Option<PathBuf>,
    /// Right-hand side, one value per line.
    #[arg(long, value_name = "PATH", requires = "matrix")]
    rhs: Option<PathBuf>,
    /// Pressure mask (one 0/1 per line); selects the Schur preconditioner.
    #[arg(long, value_name = "PATH", requires = "matrix")]
    mask: Option<PathBuf>,
    /// Subdomain count, or boxes per axis as MX,MY,MZ.
    #[arg(long, value_name = "MX[,MY,MZ]", default_value = "1")]
    subdomains: String,
    /// Solve with an approximate coarse solve (deflation.inexact).
    #[arg(long)]
    inexact: bool,
    /// Write the solution vector here.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// weak: grid grows with the subdomain count; strong: fixed grid.
    #[arg(long, default_value = "weak")]
    mode: BenchMode,
    /// Edge length of a subdomain (weak) or of the whole grid (strong).
    #[arg(long, value_name = "N")]
    size: usize,
    /// Comma-separated subdomain counts.
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_values_t = [1usize, 8, 27])]
    subdomains: Vec<usize>,
    /// Comma-separated deflation kinds, one row block each.
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_values_t = [DeflationKind::Constant])]
    kinds: Vec<DeflationKind>,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Edge length of a subdomain.
    #[arg(long, value_name = "N")]
    size: usize,
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_values_t = [1usize, 8, 27])]
    subdomains: Vec<usize>,
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

fn parse_boxes(s: &str) -> anyhow::Result<[usize; 3]> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("invalid --subdomains `{s}`"))?;
    match parts[..] {
        [m] if m > 0 => Ok(factor3(m)),
        [mx, my, mz] if mx * my * mz > 0 => Ok([mx, my, mz]),
        _ => bail!("--subdomains expects a positive count or MX,MY,MZ"),
    }
}

fn csv_sink(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn save(path: &Option<PathBuf>, x: &[f64]) -> anyhow::Result<()> {
    if let Some(p) = path {
        write_vector(p, x).with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(())
}

fn mode_of(args: &SolveArgs, cfg: &SolverConfig) -> anyhow::Result<DeflationMode> {
    Ok(if args.inexact || cfg.get_bool("deflation.inexact")? {
        DeflationMode::Inexact
    } else {
        DeflationMode::Exact
    })
}

fn read_system(matrix: &Path, rhs: &Path) -> anyhow::Result<(deflamg::sparse::CsrMatrix, Vec<f64>)> {
    let a = read_matrix_market(matrix)?;
    let b = read_vector(rhs)?;
    Ok((a, b))
}

/// Returns whether the solve converged.
fn cmd_solve(args: &SolveArgs) -> anyhow::Result<bool> {
    let cfg = args.common.load()?;
    let boxes = parse_boxes(&args.subdomains)?;
    let m: usize = boxes.iter().product();

    let (report, timings, n, x) = if let Some(n) = args.poisson {
        let p = gen_poisson3d(&GridSpec::cube(n)?, boxes)?;
        let run = run_deflated(&p.a, &p.b, &p.partition, p.coords(), &cfg, mode_of(args, &cfg)?)?;
        (run.report, run.timings, p.a.nrows(), run.x)
    } else if let Some(n) = args.saddle {
        let s = gen_saddle_point(&GridSpec::cube(n)?, boxes)?;
        let run = solve_block_system(&s.system, &s.b, &s.partition, &cfg)?;
        (run.report, run.timings, s.a.nrows(), run.x)
    } else if let (Some(matrix), Some(rhs)) = (&args.matrix, &args.rhs) {
        let (a, b) = read_system(matrix, rhs)?;
        if let Some(mask) = &args.mask {
            let mask = read_mask(mask)?;
            let sys = split_blocks(&a, &mask)?;
            let part = Partition::contiguous(a.nrows(), m)?;
            let run = solve_block_system(&sys, &b, &part, &cfg)?;
            (run.report, run.timings, a.nrows(), run.x)
        } else {
            let part = Partition::contiguous(a.nrows(), m)?;
            let run = run_deflated(&a, &b, &part, None, &cfg, mode_of(args, &cfg)?)?;
            (run.report, run.timings, a.nrows(), run.x)
        }
    } else {
        bail!("solve needs --poisson N, --saddle N, or --matrix PATH --rhs PATH");
    };

    save(&args.output, &x)?;
    let mut out = serde_json::to_value(&report)?;
    let obj = out.as_object_mut().expect("report serializes to an object");
    obj.insert("unknowns".into(), json!(n));
    obj.insert("subdomains".into(), json!(m));
    obj.insert("timings".into(), serde_json::to_value(timings)?);
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(report.converged)
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<bool> {
    let cfg = args.common.load()?;
    let rows = run_bench(args.mode, args.size, &args.subdomains, &args.kinds, &cfg)?;
    let mut sink = csv_sink(&args.csv)?;
    write_bench_csv(&mut sink, &rows)?;
    sink.flush()?;
    Ok(rows.iter().all(|r| r.converged))
}

fn cmd_compare(args: &CompareArgs) -> anyhow::Result<bool> {
    let cfg = args.common.load()?;
    let rows = compare_deflation(args.size, &args.subdomains, &cfg)?;
    let mut sink = csv_sink(&args.csv)?;
    write_compare_csv(&mut sink, &rows)?;
    sink.flush()?;
    Ok(rows.iter().all(|r| r.deflated_converged && r.local_converged))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::CompareDeflation(a) => cmd_compare(a),
        Command::PrintConfig(c) => c.load().map(|cfg| {
            println!("{}", cfg.to_canonical_json());
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
