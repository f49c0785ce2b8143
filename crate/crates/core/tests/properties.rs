//! Randomized invariants across the library.

use deflamg::amg::{AmgHierarchy, AmgParams};
use deflamg::config::SolverConfig;
use deflamg::deflation::{run_deflated, DeflationBasis, DeflationKind, DeflationMode};
use deflamg::krylov::LinearOperator;
use deflamg::problems::{gen_poisson3d, GridSpec};
use deflamg::runtime::{reassemble, split_matrix, Communicator, Partition};
use deflamg::schur::{schur_operator, split_blocks};
use deflamg::sparse::{CsrMatrix, DenseMatrix, LuFactorization};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_sparse(nrows: usize, ncols: usize, density: f64, seed: u64) -> CsrMatrix {
    let mut r = rng(seed);
    let mut t = Vec::new();
    for i in 0..nrows {
        for j in 0..ncols {
            if r.gen::<f64>() < density {
                t.push((i, j, r.gen_range(-2.0..2.0)));
            }
        }
    }
    CsrMatrix::from_triplets(nrows, ncols, &t).unwrap()
}

/// Strictly diagonally dominant, optionally symmetric.
fn dominant(n: usize, symmetric: bool, seed: u64) -> CsrMatrix {
    let mut r = rng(seed);
    let mut t = Vec::new();
    let mut rowsum = vec![0.0; n];
    for i in 0..n {
        for _ in 0..3 {
            let j = r.gen_range(0..n);
            if j == i {
                continue;
            }
            let v: f64 = r.gen_range(-1.0..1.0);
            t.push((i, j, v));
            rowsum[i] += v.abs();
            if symmetric {
                t.push((j, i, v));
                rowsum[j] += v.abs();
            }
        }
    }
    for i in 0..n {
        t.push((i, i, rowsum[i] + 0.5 + r.gen::<f64>()));
    }
    CsrMatrix::from_triplets(n, n, &t).unwrap()
}

/// Graph Laplacian of a random path-plus-chords graph, shifted to be SPD.
fn laplacian_like(n: usize, seed: u64) -> CsrMatrix {
    let mut r = rng(seed);
    let mut edges: Vec<(usize, usize, f64)> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
    for _ in 0..n {
        let (i, j) = (r.gen_range(0..n), r.gen_range(0..n));
        if i != j {
            edges.push((i, j, r.gen_range(0.1..1.0)));
        }
    }
    let mut t = Vec::new();
    let mut deg = vec![0.01; n];
    for (i, j, w) in edges {
        t.push((i, j, -w));
        t.push((j, i, -w));
        deg[i] += w;
        deg[j] += w;
    }
    t.extend(deg.into_iter().enumerate().map(|(i, d)| (i, i, d)));
    CsrMatrix::from_triplets(n, n, &t).unwrap()
}

fn vector(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn max_rel_diff(x: &[f64], y: &[f64]) -> f64 {
    let scale = norm(y).max(1e-300);
    norm(&x.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>()) / scale
}

fn sizes(n: usize, m: usize, seed: u64) -> Partition {
    // random non-empty contiguous blocks
    let mut r = rng(seed);
    let mut cuts: Vec<usize> = (1..n).collect();
    for i in (1..cuts.len()).rev() {
        cuts.swap(i, r.gen_range(0..=i));
    }
    let mut cuts: Vec<usize> = cuts.into_iter().take(m - 1).collect();
    cuts.sort_unstable();
    let mut off = vec![0];
    off.extend(cuts);
    off.push(n);
    Partition::from_offsets(off).unwrap()
}

fn random_coords(n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut r = rng(seed);
    (0..n).map(|_| [r.gen(), r.gen(), r.gen()]).collect()
}

// ---------------------------------------------------------------- sparse

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spmv_matches_dense(nr in 1usize..50, nc in 1usize..50, density in 0.0f64..0.6, seed: u64) {
        let a = random_sparse(nr, nc, density, seed);
        let x = vector(nc, seed ^ 1);
        let y = a.mul_vec(&x).unwrap();
        let yd = a.to_dense().matvec(&x).unwrap();
        let scale = 1.0 + norm(&yd);
        for (u, v) in y.iter().zip(&yd) {
            prop_assert!((u - v).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn spgemm_matches_dense(n in 1usize..30, k in 1usize..30, m in 1usize..30, seed: u64) {
        let a = random_sparse(n, k, 0.3, seed);
        let b = random_sparse(k, m, 0.3, seed.wrapping_add(7));
        let c = a.spgemm(&b).unwrap().to_dense();
        let cd = a.to_dense().matmul(&b.to_dense()).unwrap();
        let scale = 1.0 + cd.max_abs();
        for (u, v) in c.as_slice().iter().zip(cd.as_slice()) {
            prop_assert!((u - v).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn transpose_is_an_involution(nr in 1usize..40, nc in 1usize..40, seed: u64) {
        let a = random_sparse(nr, nc, 0.25, seed);
        prop_assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn lu_solve_inverts_matvec(n in 1usize..100, seed: u64) {
        let a = dominant(n, false, seed).to_dense();
        let lu = LuFactorization::new(&a).unwrap();
        let x = vector(n, seed ^ 3);
        let back = lu.solve(&a.matvec(&x).unwrap()).unwrap();
        prop_assert!(max_rel_diff(&back, &x) <= 1e-10);
    }
}

// ---------------------------------------------------------------- runtime

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn distributed_spmv_matches_serial(n in 5usize..200, mi in 0usize..4, seed: u64) {
        let m = [1, 2, 3, 5][mi];
        let a = random_sparse(n, n, 4.0 / n as f64, seed);
        let x = vector(n, seed ^ 5);
        let part = sizes(n, m, seed);
        let views = split_matrix(&a, &part).unwrap();
        let pieces = Communicator::run(m, 1, |comm| {
            let v = &views[comm.rank()];
            let mut y = vec![0.0; v.nrows_local()];
            v.spmv(comm, &x[v.rows()], &mut y).unwrap();
            y
        })
        .unwrap();
        let y = part.assemble(&pieces).unwrap();
        let ys = a.mul_vec(&x).unwrap();
        let scale = 1.0 + norm(&ys);
        for (u, v) in y.iter().zip(&ys) {
            prop_assert!((u - v).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn split_then_reassemble_is_lossless(n in 1usize..120, m in 1usize..6, seed: u64) {
        let m = m.min(n);
        let a = random_sparse(n, n, 0.1, seed);
        let views = split_matrix(&a, &sizes(n, m, seed)).unwrap();
        prop_assert_eq!(reassemble(&views, n, n).unwrap(), a);
    }

    #[test]
    fn allreduce_is_deterministic(m in 1usize..7, len in 1usize..20, seed: u64) {
        let data: Vec<Vec<f64>> = (0..m).map(|p| vector(len, seed.wrapping_add(p as u64)).iter().map(|v| v * 1e8).collect()).collect();
        let run = || Communicator::run(m, 1, |comm| comm.allreduce_sum(&data[comm.rank()]).unwrap()).unwrap();
        let first = run();
        for _ in 0..3 {
            let again = run();
            for (a, b) in first.iter().zip(&again) {
                prop_assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
        prop_assert!(first.windows(2).all(|w| w[0] == w[1]));
    }
}

// ---------------------------------------------------------------- amg

fn small_amg(a: &CsrMatrix) -> AmgHierarchy {
    let params = AmgParams {
        coarse_enough: 5,
        ..AmgParams::default()
    };
    AmgHierarchy::build(a, &params).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn galerkin_and_transpose(n in 10usize..150, seed: u64) {
        let a = laplacian_like(n, seed);
        let h = small_amg(&a);
        let levels = h.levels();
        for (l, lev) in levels.iter().enumerate() {
            prop_assert_eq!(&lev.r, &lev.p.transpose());
            let next = levels.get(l + 1).map(|n| &n.a).unwrap_or(h.coarse_matrix());
            let rap = lev.r.spgemm(&lev.a).unwrap().spgemm(&lev.p).unwrap().to_dense();
            let scale = rap.max_abs();
            for (u, v) in next.to_dense().as_slice().iter().zip(rap.as_slice()) {
                prop_assert!((u - v).abs() <= 1e-12 * scale);
            }
        }
        let s = h.level_sizes();
        prop_assert!(s.windows(2).all(|w| w[1] < w[0]), "{:?}", s);
    }

    #[test]
    fn vcycle_is_a_fixed_linear_operator(n in 2usize..50, seed: u64) {
        let a = laplacian_like(n, seed);
        let h = small_amg(&a);
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                h.vcycle(&e).unwrap()
            })
            .collect();
        let r = vector(n, seed ^ 9);
        let want: Vec<f64> = (0..n).map(|i| (0..n).map(|j| cols[j][i] * r[j]).sum()).collect();
        let got = h.vcycle(&r).unwrap();
        let scale = 1.0 + norm(&want);
        for (u, v) in got.iter().zip(&want) {
            prop_assert!((u - v).abs() <= 1e-12 * scale);
        }
    }
}

// ---------------------------------------------------------------- deflation

struct Deflated {
    r: Vec<f64>,
    pr: Vec<f64>,
    ppr: Vec<f64>,
    ztpr: Vec<f64>,
    e: DenseMatrix,
    zsum: Vec<f64>,
    centered: Vec<f64>,
}

fn deflate(a: &CsrMatrix, part: &Partition, kind: DeflationKind, coords: &[[f64; 3]], seed: u64) -> Deflated {
    let views = split_matrix(a, part).unwrap();
    let r = vector(a.nrows(), seed);
    let out = Communicator::run(part.len(), 1, |comm| {
        let v = &views[comm.rank()];
        let c = &coords[v.rows()];
        let basis = DeflationBasis::build(comm, v, kind, Some(c), None).unwrap();
        let pr = basis.project(comm, &r[v.rows()]).unwrap();
        let ppr = basis.project(comm, &pr).unwrap();
        let ztpr = basis.restrict(comm, &pr).unwrap();
        let z = basis.local_z();
        let zsum: Vec<f64> = (0..z.nrows()).map(|i| z.row(i).iter().sum()).collect();
        let centered: Vec<f64> = (1..z.ncols()).map(|j| z.column(j).iter().sum::<f64>()).collect();
        (pr, ppr, ztpr, basis.e().clone(), zsum, centered)
    })
    .unwrap();
    let mut centered = Vec::new();
    let (mut pr, mut ppr, mut zsum) = (Vec::new(), Vec::new(), Vec::new());
    for o in &out {
        pr.extend_from_slice(&o.0);
        ppr.extend_from_slice(&o.1);
        zsum.extend_from_slice(&o.4);
        centered.extend_from_slice(&o.5);
    }
    Deflated {
        r,
        pr,
        ppr,
        ztpr: out[0].2.clone(),
        e: out[0].3.clone(),
        zsum,
        centered,
    }
}

fn kind_of(linear: bool) -> DeflationKind {
    if linear {
        DeflationKind::Linear
    } else {
        DeflationKind::Constant
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn projector_is_idempotent_and_orthogonal(
        n in 8usize..200, m in 1usize..6, linear: bool, symmetric: bool, seed: u64,
    ) {
        let m = m.min(n / 4).max(1);
        let a = dominant(n, symmetric, seed);
        let d = deflate(&a, &sizes(n, m, seed), kind_of(linear), &random_coords(n, seed), seed ^ 11);
        let rn = norm(&d.r);
        prop_assert!(max_rel_diff(&d.ppr, &d.pr) * norm(&d.pr) <= 1e-12 * rn);
        prop_assert!(norm(&d.ztpr) <= 1e-10 * rn, "{:?}", d.ztpr);
    }

    #[test]
    fn coarse_matrix_inherits_symmetry(n in 8usize..150, m in 1usize..6, linear: bool, seed: u64) {
        let m = m.min(n / 4).max(1);
        let a = dominant(n, true, seed);
        let d = deflate(&a, &sizes(n, m, seed), kind_of(linear), &random_coords(n, seed), seed);
        let e = &d.e;
        let scale = e.max_abs();
        for i in 0..e.nrows() {
            for j in 0..e.ncols() {
                prop_assert!((e.row(i)[j] - e.row(j)[i]).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn constant_columns_partition_unity(n in 1usize..150, m in 1usize..6, seed: u64) {
        let m = m.min(n);
        let a = dominant(n, false, seed);
        let d = deflate(&a, &sizes(n, m, seed), DeflationKind::Constant, &random_coords(n, seed), seed);
        prop_assert!(d.zsum.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn linear_columns_are_centered(n in 8usize..150, m in 1usize..5, seed: u64) {
        let m = m.min(n / 4).max(1);
        let a = dominant(n, false, seed);
        let part = sizes(n, m, seed);
        let d = deflate(&a, &part, DeflationKind::Linear, &random_coords(n, seed), seed);
        let largest = part.ranges().map(|r| r.len()).max().unwrap() as f64;
        for s in &d.centered {
            prop_assert!(s.abs() <= 1e-12 * largest);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn deflated_solve_matches_dense_lu(n in 8usize..300, m in 1usize..6, linear: bool, seed: u64) {
        let m = m.min(n / 4).max(1);
        let a = dominant(n, false, seed);
        let b = vector(n, seed ^ 13);
        let coords = random_coords(n, seed);
        let mut cfg = SolverConfig::default();
        cfg.set("solver.tol", json!(1e-10)).unwrap();
        cfg.set("deflation.kind", json!(kind_of(linear).to_string())).unwrap();
        let run = run_deflated(&a, &b, &sizes(n, m, seed), Some(&coords), &cfg, DeflationMode::Exact).unwrap();
        prop_assert!(run.report.converged, "{:?}", run.report);
        let x = LuFactorization::new(&a.to_dense()).unwrap().solve(&b).unwrap();
        prop_assert!(max_rel_diff(&run.x, &x) <= 1e-7);
    }
}

// ---------------------------------------------------------------- operators

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn operators_are_linear(n in 2usize..80, alpha in -3.0f64..3.0, seed: u64) {
        let a = dominant(n, false, seed);
        let (x, y) = (vector(n, seed ^ 1), vector(n, seed ^ 2));
        let comb: Vec<f64> = x.iter().zip(&y).map(|(p, q)| alpha * p + q).collect();
        let mut ax = vec![0.0; n];
        let mut ay = vec![0.0; n];
        let mut ac = vec![0.0; n];
        LinearOperator::apply(&a, &x, &mut ax).unwrap();
        LinearOperator::apply(&a, &y, &mut ay).unwrap();
        LinearOperator::apply(&a, &comb, &mut ac).unwrap();
        let want: Vec<f64> = ax.iter().zip(&ay).map(|(p, q)| alpha * p + q).collect();
        prop_assert!(max_rel_diff(&ac, &want) <= 1e-12);
    }
}

// ---------------------------------------------------------------- schur

/// Random saddle-point-shaped matrix with a nonzero velocity diagonal.
fn saddle(n: usize, seed: u64) -> (CsrMatrix, Vec<bool>) {
    let mut r = rng(seed);
    let mask: Vec<bool> = (0..n).map(|i| i % 3 == 2 || r.gen::<f64>() < 0.2).collect();
    let base = random_sparse(n, n, 0.2, seed);
    let mut t: Vec<_> = (0..n)
        .filter_map(|i| (!mask[i]).then_some((i, i, 2.0 + r.gen::<f64>())))
        .collect();
    for i in 0..n {
        let (c, v) = base.row(i);
        t.extend(
            c.iter()
                .zip(v)
                .filter(|(&j, _)| j != i || mask[i])
                .map(|(&j, &x)| (i, j, x)),
        );
    }
    (CsrMatrix::from_triplets(n, n, &t).unwrap(), mask)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_blocks_roundtrip(n in 3usize..60, seed: u64) {
        let (a, mask) = saddle(n, seed);
        let sys = split_blocks(&a, &mask).unwrap();
        prop_assert_eq!(sys.reassemble(), a);
        let x = vector(n, seed);
        let (u, p) = sys.split_vector(&x).unwrap();
        prop_assert_eq!(sys.merge_vector(&u, &p).unwrap(), x);
    }

    #[test]
    fn schur_operator_matches_dense_formula(n in 3usize..50, seed: u64) {
        let (a, mask) = saddle(n, seed);
        let sys = split_blocks(&a, &mask).unwrap();
        let np = sys.n_p();
        let kd = sys.k.diagonal();
        let (g, d, s) = (sys.g.to_dense(), sys.d.to_dense(), sys.s.to_dense());
        let op = schur_operator(&sys);
        for j in 0..np {
            let mut e = vec![0.0; np];
            e[j] = 1.0;
            let mut col = vec![0.0; np];
            op.apply(&e, &mut col).unwrap();
            for i in 0..np {
                let dense = s.row(i)[j]
                    - (0..sys.n_u()).map(|k| d.row(i)[k] * g.row(k)[j] / kd[k]).sum::<f64>();
                prop_assert!((col[i] - dense).abs() <= 1e-12 * (1.0 + dense.abs()));
            }
        }
    }
}

// ---------------------------------------------------------------- problems and config

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn divisible_boxes_are_equal(k in 1usize..4, q in 1usize..5) {
        let n = k * q;
        let p = gen_poisson3d(&GridSpec::cube(n).unwrap(), [k, k, k]).unwrap();
        prop_assert_eq!(p.partition.len(), k * k * k);
        prop_assert!(p.partition.ranges().all(|r| r.len() == q * q * q));
    }

    #[test]
    fn unknown_config_keys_name_their_path(key in "[a-z]{3,8}") {
        prop_assume!(!["solver", "precond", "deflation", "runtime"].contains(&key.as_str()));
        let text = format!(r#"{{"solver": {{"{key}": 1}}}}"#);
        let err = SolverConfig::from_json_str(&text).unwrap_err().to_string();
        prop_assert!(err.contains(&format!("solver.{key}")), "{}", err);
    }
}
