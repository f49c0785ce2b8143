//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion
//! and fails if any criterion fails.

// `!(x <= tol)` on purpose: NaN must fail a check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use deflamg::amg::{AmgHierarchy, AmgParams};
use deflamg::bench::{compare_deflation, factor3, run_bench, BenchMode};
use deflamg::config::SolverConfig;
use deflamg::deflation::{
    run_deflated, DeflatedPreconditioner, DeflationBasis, DeflationKind, DeflationMode, DistMatrix, LocalAmg,
};
use deflamg::krylov::{cg, fgmres, solve, FnPreconditioner, KrylovParams, LinearOperator, SolverKind};
use deflamg::problems::{gen_poisson3d, gen_saddle_point, GridSpec, ProblemInstance};
use deflamg::runtime::{split_matrix, Communicator, Partition, Serial};
use deflamg::schur::{schur_operator, solve_block_system, split_blocks};
use deflamg::sparse::{CsrMatrix, LuFactorization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Listing 5 of the reference configuration, verbatim.
const NAVIER_STOKES_JSON: &str = r#"{
    "solver": {
        "type" : "fgmres",
        "M" : 50,
        "tol" : 1e-4
    },
    "precond": {
        "usolver": {
            "solver": {
                "type" : "gmres",
                "tol" : 1e-3,
                "maxiter" : 5
            }
        },
        "psolver": {
            "isolver": {
                "type" : "fgmres",
                "tol" : 1e-2,
                "maxiter" : 20
            },
            "local" : {
                "coarse_enough" : 500
            }
        }
    }
}"#;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn rel_diff(x: &[f64], y: &[f64]) -> f64 {
    norm(&x.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>()) / norm(y)
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let ax = a.mul_vec(x).unwrap();
    rel_diff(&ax, b)
}

fn poisson(n: usize, m: usize) -> ProblemInstance {
    gen_poisson3d(&GridSpec::cube(n).unwrap(), factor3(m)).unwrap()
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_dominant(n: usize, seed: u64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..n {
        let mut off = 0.0;
        for _ in 0..5 {
            let j = rng.gen_range(0..n);
            if j != i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                off += v.abs();
                t.push((i, j, v));
            }
        }
        t.push((i, i, off + 0.5 + rng.gen::<f64>()));
    }
    CsrMatrix::from_triplets(n, n, &t).unwrap()
}

fn cfg_with(pairs: &[(&str, serde_json::Value)]) -> SolverConfig {
    let mut cfg = SolverConfig::default();
    for (k, v) in pairs {
        cfg.set(k, v.clone()).unwrap();
    }
    cfg
}

// ---------------------------------------------------------------------------

fn c01_projector_algebra() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    for m in [2, 8] {
        let p = poisson(16, m);
        let views = split_matrix(&p.a, &p.partition).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(m as u64);
        let rs: Vec<Vec<f64>> = (0..20).map(|_| random_vec(p.a.nrows(), &mut rng)).collect();
        for kind in [DeflationKind::Constant, DeflationKind::Linear] {
            let out = Communicator::run(m, 1, |comm| {
                let v = &views[comm.rank()];
                let basis = DeflationBasis::build(comm, v, kind, Some(&p.coords[v.rows()]), None).unwrap();
                rs.iter()
                    .map(|r| {
                        let pr = basis.project(comm, &r[v.rows()]).unwrap();
                        let ppr = basis.project(comm, &pr).unwrap();
                        let ztpr = basis.restrict(comm, &pr).unwrap();
                        (pr, ppr, ztpr)
                    })
                    .collect::<Vec<_>>()
            })
            .unwrap();
            for (k, r) in rs.iter().enumerate() {
                let pr: Vec<f64> = out.iter().flat_map(|o| o[k].0.clone()).collect();
                let ppr: Vec<f64> = out.iter().flat_map(|o| o[k].1.clone()).collect();
                let idem = norm(&pr.iter().zip(&ppr).map(|(a, b)| a - b).collect::<Vec<_>>()) / norm(r);
                let orth = norm(&out[0][k].2) / norm(r);
                worst = (worst.0.max(idem), worst.1.max(orth));
            }
        }
    }
    ensure!(worst.0 <= 1e-12, "||P(P r) - P r|| / ||r|| = {:.2e}", worst.0);
    ensure!(worst.1 <= 1e-10, "||Z^T P r|| / ||r|| = {:.2e}", worst.1);
    Ok(format!(
        "max idempotence error {:.1e}, max orthogonality error {:.1e}",
        worst.0, worst.1
    ))
}

fn c02_oracle_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for kind in [DeflationKind::Constant, DeflationKind::Linear] {
        let cfg = cfg_with(&[
            ("solver.tol", json!(1e-10)),
            ("deflation.kind", json!(kind.to_string())),
        ]);
        for m in [1, 2, 4] {
            for (n, seed) in [(40, 1u64), (150, 2), (300, 3)] {
                let a = random_dominant(n, seed);
                let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
                let b = random_vec(n, &mut rng);
                let coords: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
                let part = Partition::contiguous(n, m).unwrap();
                let run = run_deflated(&a, &b, &part, Some(&coords), &cfg, DeflationMode::Exact).unwrap();
                let x = LuFactorization::new(&a.to_dense()).unwrap().solve(&b).unwrap();
                ensure!(run.report.converged, "{kind} m={m} n={n}: {:?}", run.report);
                worst = worst.max(rel_diff(&run.x, &x));
                cases += 1;
            }
            let p = poisson(8, m);
            let run = run_deflated(&p.a, &p.b, &p.partition, p.coords(), &cfg, DeflationMode::Exact).unwrap();
            let x = LuFactorization::new(&p.a.to_dense()).unwrap().solve(&p.b).unwrap();
            ensure!(run.report.converged, "{kind} m={m} Poisson 8^3: {:?}", run.report);
            worst = worst.max(rel_diff(&run.x, &x));
            cases += 1;
        }
    }
    ensure!(worst <= 1e-7, "max relative error against dense LU {worst:.2e}");
    Ok(format!(
        "{cases} systems, max relative error against dense LU {worst:.1e}"
    ))
}

fn c03_hand_checkable_coarse_matrix() -> Outcome {
    let a = CsrMatrix::from_triplets(
        4,
        4,
        &[
            (0, 0, 2.0),
            (0, 1, -1.0),
            (1, 0, -1.0),
            (1, 1, 2.0),
            (1, 2, -1.0),
            (2, 1, -1.0),
            (2, 2, 2.0),
            (2, 3, -1.0),
            (3, 2, -1.0),
            (3, 3, 2.0),
        ],
    )
    .unwrap();
    let part = Partition::contiguous(4, 2).unwrap();
    let views = split_matrix(&a, &part).unwrap();
    let out = Communicator::run(2, 1, |comm| {
        let basis = DeflationBasis::build(comm, &views[comm.rank()], DeflationKind::Constant, None, None).unwrap();
        (basis.e().as_slice().to_vec(), basis.az().to_dense())
    })
    .unwrap();
    let e = &out[0].0;
    ensure!(e == &[2.0, -1.0, -1.0, 2.0], "E = {e:?}");
    let az: Vec<[f64; 2]> = out
        .iter()
        .flat_map(|(_, d)| (0..d.nrows()).map(|i| [d.row(i)[0], d.row(i)[1]]).collect::<Vec<_>>())
        .collect();
    let col = |j: usize| az.iter().map(|r| r[j]).collect::<Vec<_>>();
    ensure!(col(0) == [1.0, 1.0, -1.0, 0.0], "AZ column 1 = {:?}", col(0));
    ensure!(col(1) == [0.0, -1.0, 1.0, 1.0], "AZ column 2 = {:?}", col(1));
    Ok("E = [[2,-1],[-1,2]], AZ = (1,1,-1,0)/(0,-1,1,1) exactly".into())
}

fn c04_weak_scaling_flatness() -> Outcome {
    let rows = compare_deflation(12, &[1, 8, 27], &SolverConfig::default()).unwrap();
    let d: Vec<usize> = rows.iter().map(|r| r.deflated_iters).collect();
    let l: Vec<usize> = rows.iter().map(|r| r.local_iters).collect();
    ensure!(
        rows.iter().all(|r| r.deflated_converged && r.local_converged),
        "unconverged run: {rows:?}"
    );
    let spread = *d.iter().max().unwrap() as f64 / *d.iter().min().unwrap() as f64;
    let detail = format!("deflated iterations {d:?} (spread {spread:.2}x), local-only {l:?}");
    ensure!(spread <= 2.0, "{detail}: deflated spread exceeds 2x");
    ensure!(
        l.windows(2).all(|w| w[1] > w[0]),
        "{detail}: local-only counts not strictly increasing"
    );
    Ok(detail)
}

fn c05_strong_scaling_improvement() -> Outcome {
    let rows = run_bench(
        BenchMode::Strong,
        32,
        &[1, 8, 27],
        &[DeflationKind::Constant],
        &SolverConfig::default(),
    )
    .unwrap();
    ensure!(rows.iter().all(|r| r.converged), "unconverged run: {rows:?}");
    let it: Vec<usize> = rows.iter().map(|r| r.iters).collect();
    let detail = format!("iterations for m = 1, 8, 27: {it:?}");
    ensure!(it[2] <= it[0], "{detail}: m=27 needs more iterations than m=1");
    Ok(detail)
}

fn c06_linear_vs_constant() -> Outcome {
    let rows = run_bench(
        BenchMode::Strong,
        32,
        &[8],
        &[DeflationKind::Constant, DeflationKind::Linear],
        &SolverConfig::default(),
    )
    .unwrap();
    ensure!(rows.iter().all(|r| r.converged), "unconverged run: {rows:?}");
    let (c, l) = (rows[0].iters, rows[1].iters);
    ensure!(l <= c, "linear {l} > constant {c} iterations");
    Ok(format!("linear {l} <= constant {c} iterations"))
}

fn c07_amg_standalone() -> Outcome {
    let p = poisson(32, 1);
    let h = AmgHierarchy::build(&p.a, &AmgParams::default()).unwrap();
    let mut x = vec![0.0; p.a.nrows()];
    let rep = cg(
        &Serial,
        &p.a,
        &h,
        &p.b,
        &mut x,
        &KrylovParams::new(SolverKind::Cg, 1e-6, 50),
    )
    .unwrap();
    let res = true_residual(&p.a, &p.b, &x);
    ensure!(rep.converged && res <= 1e-6, "{rep:?}, true residual {res:.2e}");
    Ok(format!(
        "{} CG iterations, residual {res:.1e}, levels {:?}",
        rep.iterations,
        h.level_sizes()
    ))
}

fn c08_galerkin_hierarchy() -> Outcome {
    let p = poisson(16, 1);
    let h = AmgHierarchy::build(&p.a, &AmgParams::default()).unwrap();
    let levels = h.levels();
    let mut worst = 0.0f64;
    for (l, lev) in levels.iter().enumerate() {
        ensure!(lev.r == lev.p.transpose(), "level {l}: R != P^T");
        let next = levels.get(l + 1).map(|n| &n.a).unwrap_or(h.coarse_matrix());
        let rap = lev.r.spgemm(&lev.a).unwrap().spgemm(&lev.p).unwrap().to_dense();
        let got = next.to_dense();
        let scale = rap.max_abs();
        for (u, v) in got.as_slice().iter().zip(rap.as_slice()) {
            worst = worst.max((u - v).abs() / scale);
        }
    }
    let sizes = h.level_sizes();
    ensure!(worst <= 1e-12, "Galerkin error {worst:.2e}");
    ensure!(sizes.windows(2).all(|w| w[1] < w[0]), "level sizes {sizes:?}");
    ensure!(*sizes.last().unwrap() <= 500, "bottom level {sizes:?}");
    Ok(format!("levels {sizes:?}, max Galerkin error {worst:.1e}"))
}

fn c09_schur_preconditioner() -> Outcome {
    let cfg = SolverConfig::from_json_str(NAVIER_STOKES_JSON).unwrap();
    let mut its = Vec::new();
    for m in [1, 2, 4, 8] {
        let s = gen_saddle_point(&GridSpec::cube(8).unwrap(), factor3(m)).unwrap();
        let run = solve_block_system(&s.system, &s.b, &s.partition, &cfg).unwrap();
        let res = true_residual(&s.a, &s.b, &run.x);
        ensure!(
            run.report.converged && res <= 1e-4,
            "m={m}: {:?}, true residual {res:.2e}",
            run.report
        );
        its.push(run.report.iterations);
    }
    let spread = *its.iter().max().unwrap() as f64 / *its.iter().min().unwrap() as f64;

    // operator check on small instances: the generated 2^3 system and a random one
    let mut worst = 0.0f64;
    let small = gen_saddle_point(&GridSpec::cube(2).unwrap(), [1, 1, 1]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mask: Vec<bool> = (0..45).map(|i| i % 3 == 0).collect();
    let mut t: Vec<_> = (0..45)
        .filter(|&i| !mask[i])
        .map(|i| (i, i, 3.0 + rng.gen::<f64>()))
        .collect();
    for _ in 0..200 {
        let (i, j) = (rng.gen_range(0..45), rng.gen_range(0..45));
        if i != j || mask[i] {
            t.push((i, j, rng.gen_range(-1.0..1.0)));
        }
    }
    let random = split_blocks(&CsrMatrix::from_triplets(45, 45, &t).unwrap(), &mask).unwrap();
    for sys in [&small.system, &random] {
        let (g, d, s) = (sys.g.to_dense(), sys.d.to_dense(), sys.s.to_dense());
        let kd = sys.k.diagonal();
        let op = schur_operator(sys);
        for j in 0..sys.n_p() {
            let mut e = vec![0.0; sys.n_p()];
            e[j] = 1.0;
            let mut col = vec![0.0; sys.n_p()];
            op.apply(&e, &mut col).unwrap();
            for (i, c) in col.iter().enumerate() {
                let want = s.row(i)[j] - (0..sys.n_u()).map(|k| d.row(i)[k] * g.row(k)[j] / kd[k]).sum::<f64>();
                worst = worst.max((c - want).abs() / (1.0 + want.abs()));
            }
        }
    }
    let detail =
        format!("outer iterations for m = 1, 2, 4, 8: {its:?} (spread {spread:.2}x), operator error {worst:.1e}");
    ensure!(worst <= 1e-12, "{detail}");
    ensure!(spread <= 2.0, "{detail}: spread exceeds 2x");
    Ok(detail)
}

fn c10_determinism() -> Outcome {
    let p = poisson(16, 8);
    let s = gen_saddle_point(&GridSpec::cube(4).unwrap(), [2, 2, 1]).unwrap();
    let linear = cfg_with(&[("deflation.kind", json!("linear"))]);
    let inexact = cfg_with(&[("deflation.coarse_tol", json!(1e-2)), ("solver.type", json!("fgmres"))]);
    let default = SolverConfig::default();
    let runs: Vec<(&str, Box<dyn Fn() -> (usize, f64)>)> = vec![
        (
            "exact/constant",
            Box::new(|| {
                let r = run_deflated(&p.a, &p.b, &p.partition, p.coords(), &default, DeflationMode::Exact).unwrap();
                (r.report.iterations, r.report.relative_residual)
            }),
        ),
        (
            "exact/linear",
            Box::new(|| {
                let r = run_deflated(&p.a, &p.b, &p.partition, p.coords(), &linear, DeflationMode::Exact).unwrap();
                (r.report.iterations, r.report.relative_residual)
            }),
        ),
        (
            "inexact",
            Box::new(|| {
                let r = run_deflated(&p.a, &p.b, &p.partition, p.coords(), &inexact, DeflationMode::Inexact).unwrap();
                (r.report.iterations, r.report.relative_residual)
            }),
        ),
        (
            "local only",
            Box::new(|| {
                let r = run_deflated(&p.a, &p.b, &p.partition, None, &default, DeflationMode::None).unwrap();
                (r.report.iterations, r.report.relative_residual)
            }),
        ),
        (
            "schur",
            Box::new(|| {
                let r = solve_block_system(&s.system, &s.b, &s.partition, &default).unwrap();
                (r.report.iterations, r.report.relative_residual)
            }),
        ),
    ];
    for (name, run) in &runs {
        let first = run();
        for _ in 0..2 {
            let again = run();
            ensure!(
                again.0 == first.0 && again.1.to_bits() == first.1.to_bits(),
                "{name}: {first:?} then {again:?}"
            );
        }
    }

    // same solver and partition-independent preconditioner over 1 and 4 subdomains
    let q = poisson(16, 4);
    let diag = q.a.diagonal();
    let mut spread = 0.0f64;
    for kind in [
        SolverKind::Cg,
        SolverKind::BiCgStab2,
        SolverKind::Gmres,
        SolverKind::Fgmres,
    ] {
        let params = KrylovParams::new(kind, 1e-8, 1000).with_restart(30);
        let mut res = Vec::new();
        for m in [1, 4] {
            let part = Partition::contiguous(q.a.nrows(), m).unwrap();
            let views = split_matrix(&q.a, &part).unwrap();
            let out = Communicator::run(m, 1, |comm| {
                let v = &views[comm.rank()];
                let d = &diag[v.rows()];
                let jacobi = FnPreconditioner(|r: &[f64], z: &mut [f64]| {
                    z.iter_mut().zip(r.iter().zip(d)).for_each(|(z, (r, d))| *z = r / d);
                    Ok(())
                });
                let mut x = vec![0.0; v.nrows_local()];
                let rep = solve(
                    comm,
                    &DistMatrix { comm, view: v },
                    &jacobi,
                    &q.b[v.rows()],
                    &mut x,
                    &params,
                )
                .unwrap();
                (rep, x)
            })
            .unwrap();
            let x: Vec<f64> = out.iter().flat_map(|o| o.1.clone()).collect();
            let r: Vec<f64> =
                q.a.mul_vec(&x)
                    .unwrap()
                    .iter()
                    .zip(&q.b)
                    .map(|(ax, b)| b - ax)
                    .collect();
            res.push(norm(&r));
        }
        spread = spread.max((res[0] - res[1]).abs());
    }
    ensure!(spread <= 1e-10, "m=1 vs m=4 residual norms differ by {spread:.2e}");

    let tight = cfg_with(&[("solver.tol", json!(1e-10))]);
    let mut deflated = Vec::new();
    for m in [1, 4] {
        let pm = poisson(16, m);
        let r = run_deflated(&pm.a, &pm.b, &pm.partition, pm.coords(), &tight, DeflationMode::Exact).unwrap();
        ensure!(r.report.converged, "deflated m={m}: {:?}", r.report);
        deflated.push(r.report.relative_residual * norm(&pm.b));
    }
    let dd = (deflated[0] - deflated[1]).abs();
    ensure!(dd <= 1e-10, "deflated m=1 vs m=4 residual norms differ by {dd:.2e}");
    Ok(format!(
        "{} configurations bitwise stable over 3 runs; m=1 vs m=4 residual norms: Krylov {spread:.1e}, deflated {dd:.1e}",
        runs.len()
    ))
}

fn c11_config_fidelity() -> Outcome {
    let cfg = SolverConfig::from_json_str(NAVIER_STOKES_JSON).map_err(|e| e.to_string())?;
    ensure!(
        cfg.get_usize("precond.psolver.isolver.maxiter").unwrap() == 20,
        "psolver.isolver.maxiter"
    );
    ensure!(cfg.get_f64("solver.tol").unwrap() == 1e-4, "solver.tol");
    ensure!(
        cfg.get_str("precond.usolver.solver.type").unwrap() == "gmres",
        "usolver type"
    );
    let s = gen_saddle_point(&GridSpec::cube(4).unwrap(), [2, 1, 1]).unwrap();
    let run = solve_block_system(&s.system, &s.b, &s.partition, &cfg).unwrap();
    ensure!(
        run.report.converged && run.report.relative_residual <= 1e-4,
        "{:?}",
        run.report
    );
    let d = SolverConfig::default();
    ensure!(d.get_f64("solver.tol").unwrap() == 1e-6, "default solver.tol");
    ensure!(d.get_f64("precond.relax.damping").unwrap() == 0.8, "default damping");
    ensure!(
        SolverConfig::from_json_str("{}").unwrap() == d,
        "empty object differs from defaults"
    );
    Ok(format!(
        "listing drives the Schur solver ({} outer iterations); defaults tol 1e-6, damping 0.8",
        run.report.iterations
    ))
}

/// Multiplicative deflation preconditioner with an exact LU coarse solve,
/// under the outer FGMRES the inexact mode uses.
fn adef1_with_lu(p: &ProblemInstance, cfg: &SolverConfig) -> Vec<f64> {
    let m = p.partition.len();
    let views = split_matrix(&p.a, &p.partition).unwrap();
    let amg = AmgParams::from_config(cfg, "precond").unwrap();
    let mut params = KrylovParams::from_config(cfg, "solver").unwrap();
    params.kind = SolverKind::Fgmres;
    let out = Communicator::run(m, 1, |comm| {
        let v = &views[comm.rank()];
        let basis = DeflationBasis::build(comm, v, DeflationKind::Constant, None, None).unwrap();
        let local = LocalAmg::build(&v.local_block(), &amg).unwrap();
        let prec = DeflatedPreconditioner {
            comm,
            basis: &basis,
            local: &local,
        };
        let mut x = vec![0.0; v.nrows_local()];
        fgmres(
            comm,
            &DistMatrix { comm, view: v },
            &prec,
            &p.b[v.rows()],
            &mut x,
            &params,
        )
        .unwrap();
        x
    })
    .unwrap();
    out.concat()
}

fn c12_inexact_deflation() -> Outcome {
    let p = poisson(16, 8);
    let loose = cfg_with(&[("deflation.coarse_tol", json!(1e-2)), ("solver.type", json!("fgmres"))]);
    let run = run_deflated(&p.a, &p.b, &p.partition, p.coords(), &loose, DeflationMode::Inexact).unwrap();
    let res = true_residual(&p.a, &p.b, &run.x);
    ensure!(
        run.report.converged && res <= 1e-6,
        "coarse_tol 1e-2: {:?}, true residual {res:.2e}",
        run.report
    );

    let tight = cfg_with(&[("deflation.coarse_tol", json!(1e-14)), ("solver.type", json!("fgmres"))]);
    let inexact = run_deflated(&p.a, &p.b, &p.partition, p.coords(), &tight, DeflationMode::Inexact).unwrap();
    let lu = adef1_with_lu(&p, &tight);
    let d_lu = rel_diff(&inexact.x, &lu);
    ensure!(
        d_lu <= 1e-8,
        "coarse_tol 1e-14 vs LU coarse solve: relative difference {d_lu:.2e}"
    );

    let very_tight = cfg_with(&[
        ("deflation.coarse_tol", json!(1e-14)),
        ("solver.type", json!("fgmres")),
        ("solver.tol", json!(1e-12)),
    ]);
    let a = run_deflated(
        &p.a,
        &p.b,
        &p.partition,
        p.coords(),
        &very_tight,
        DeflationMode::Inexact,
    )
    .unwrap();
    let b = run_deflated(&p.a, &p.b, &p.partition, p.coords(), &very_tight, DeflationMode::Exact).unwrap();
    let d_exact = rel_diff(&a.x, &b.x);
    ensure!(
        d_exact <= 1e-8,
        "coarse_tol 1e-14 vs projected exact mode: relative difference {d_exact:.2e}"
    );
    Ok(format!(
        "coarse_tol 1e-2: {} iterations, true residual {res:.1e}; coarse_tol 1e-14 vs LU coarse solve {d_lu:.1e}, vs exact mode {d_exact:.1e}",
        run.report.iterations
    ))
}

// ---------------------------------------------------------------------------

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        name: "projector algebra",
        limit: Duration::from_secs(10),
        run: c01_projector_algebra,
    },
    Criterion {
        id: 2,
        name: "oracle equivalence",
        limit: Duration::from_secs(30),
        run: c02_oracle_equivalence,
    },
    Criterion {
        id: 3,
        name: "hand-checkable coarse matrix",
        limit: Duration::from_secs(1),
        run: c03_hand_checkable_coarse_matrix,
    },
    Criterion {
        id: 4,
        name: "weak-scaling flatness",
        limit: Duration::from_secs(180),
        run: c04_weak_scaling_flatness,
    },
    Criterion {
        id: 5,
        name: "strong-scaling iteration improvement",
        limit: Duration::from_secs(180),
        run: c05_strong_scaling_improvement,
    },
    Criterion {
        id: 6,
        name: "linear vs constant deflation",
        limit: Duration::from_secs(60),
        run: c06_linear_vs_constant,
    },
    Criterion {
        id: 7,
        name: "AMG standalone",
        limit: Duration::from_secs(30),
        run: c07_amg_standalone,
    },
    Criterion {
        id: 8,
        name: "Galerkin and hierarchy invariants",
        limit: Duration::from_secs(10),
        run: c08_galerkin_hierarchy,
    },
    Criterion {
        id: 9,
        name: "Schur preconditioner",
        limit: Duration::from_secs(120),
        run: c09_schur_preconditioner,
    },
    Criterion {
        id: 10,
        name: "distributed determinism",
        limit: Duration::from_secs(60),
        run: c10_determinism,
    },
    Criterion {
        id: 11,
        name: "config fidelity",
        limit: Duration::from_secs(1),
        run: c11_config_fidelity,
    },
    Criterion {
        id: 12,
        name: "inexact deflation mode",
        limit: Duration::from_secs(30),
        run: c12_inexact_deflation,
    },
];

#[test]
fn acceptance_criteria() {
    // bypass the test harness capture so the summary always shows
    let mut err = std::io::stderr();
    let mut failed = Vec::new();
    for c in CRITERIA {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > c.limit => Err(format!("{d}; took {elapsed:.1?}, limit {:?}", c.limit)),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        writeln!(
            err,
            "acceptance {:>2} {tag} {} [{:.2}s]: {detail}",
            c.id,
            c.name,
            elapsed.as_secs_f64()
        )
        .unwrap();
        if outcome.is_err() {
            failed.push(c.id);
        }
    }
    assert!(failed.is_empty(), "failed acceptance criteria: {failed:?}");
}
