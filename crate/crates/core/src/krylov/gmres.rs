use super::{check_sizes, finish, global_norm, residual, KrylovParams, LinearOperator, Preconditioner, SolveReport};
use crate::error::Result;
use crate::runtime::Reduce;
use crate::sparse::{axpy, dot};

/// Restarted GMRES(m) with right preconditioning. The preconditioner must be
/// a fixed linear operator; use [`fgmres`] otherwise.
pub fn gmres<A, M>(
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
    run(red, a, m, b, x, params, false)
}

/// Flexible GMRES(m): stores the preconditioned directions, so `M` may
/// change between iterations (e.g. an inner Krylov solve).
pub fn fgmres<A, M>(
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
    run(red, a, m, b, x, params, true)
}

/// Classical Gram-Schmidt applied twice; each pass needs a single batched
/// reduction. Returns the projection coefficients and the remaining norm.
pub(crate) fn orthogonalize(red: &dyn Reduce, basis: &[Vec<f64>], w: &mut [f64]) -> Result<(Vec<f64>, f64)> {
    let k = basis.len();
    let mut h = vec![0.0; k];
    for _ in 0..2 {
        let mut c: Vec<f64> = basis.iter().map(|v| dot(v, w)).collect();
        red.sum(&mut c)?;
        for (v, ci) in basis.iter().zip(&c) {
            axpy(-ci, v, w);
        }
        h.iter_mut().zip(&c).for_each(|(h, c)| *h += c);
    }
    let norm = global_norm(red, w)?;
    Ok((h, norm))
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

fn run<A, M>(
    red: &dyn Reduce,
    a: &A,
    m: &M,
    b: &[f64],
    x: &mut [f64],
    params: &KrylovParams,
    flexible: bool,
) -> Result<SolveReport>
where
    A: LinearOperator + ?Sized,
    M: Preconditioner + ?Sized,
{
    check_sizes(b, x)?;
    let n = b.len();
    let bnorm = global_norm(red, b)?;
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveReport::trivial());
    }
    let tol = params.tol;
    let restart = params.restart.max(1);

    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    residual(a, b, x, &mut r)?;
    let mut beta = global_norm(red, &r)?;
    let mut iterations = 0;

    // column-major Hessenberg, column j has j + 2 entries
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(restart);
    let mut cs = vec![0.0; restart];
    let mut sn = vec![0.0; restart];
    let mut g = vec![0.0; restart + 1];
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
    let mut zs: Vec<Vec<f64>> = Vec::new();

    while beta / bnorm > tol && iterations < params.maxiter {
        v.clear();
        zs.clear();
        h.clear();
        v.push(r.iter().map(|ri| ri / beta).collect());
        g.iter_mut().for_each(|gi| *gi = 0.0);
        g[0] = beta;

        let mut k = 0;
        for j in 0..restart {
            if iterations >= params.maxiter {
                break;
            }
            m.apply(&v[j], &mut z)?;
            a.apply(&z, &mut w)?;
            if flexible {
                zs.push(z.clone());
            }
            let (mut col, hn) = orthogonalize(red, &v, &mut w)?;
            iterations += 1;
            k = j + 1;

            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let (c, s) = givens(col[j], hn);
            cs[j] = c;
            sn[j] = s;
            col[j] = c * col[j] + s * hn;
            g[j + 1] = -s * g[j];
            g[j] *= c;
            h.push(col);

            let colnorm = h[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            if hn <= f64::EPSILON * colnorm {
                // invariant subspace found
                break;
            }
            if g[j + 1].abs() / bnorm <= tol {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        if k == 0 {
            break;
        }

        // back substitution on the triangularized Hessenberg
        let mut y = g[..k].to_vec();
        for i in (0..k).rev() {
            for jj in (i + 1)..k {
                y[i] -= h[jj][i] * y[jj];
            }
            y[i] = if h[i][i] != 0.0 { y[i] / h[i][i] } else { 0.0 };
        }
        if flexible {
            for (yi, zi) in y.iter().zip(&zs) {
                axpy(*yi, zi, x);
            }
        } else {
            let mut t = vec![0.0; n];
            for (yi, vi) in y.iter().zip(&v) {
                axpy(*yi, vi, &mut t);
            }
            m.apply(&t, &mut z)?;
            axpy(1.0, &z, x);
        }

        residual(a, b, x, &mut r)?;
        let new_beta = global_norm(red, &r)?;
        if new_beta >= beta && k < restart && new_beta / bnorm > tol {
            // lucky breakdown that did not reduce the residual: stagnation
            beta = new_beta;
            break;
        }
        beta = new_beta;
    }
    let _ = beta;
    finish(red, a, b, x, bnorm, iterations, tol, None)
}

/// Orthonormal Krylov basis `[r0, A M r0, ...]` of dimension `k` produced by
/// the same orthogonalization the solvers use.
#[cfg(test)]
pub(crate) fn arnoldi_basis<A, M>(red: &dyn Reduce, a: &A, m: &M, r0: &[f64], k: usize) -> Result<Vec<Vec<f64>>>
where
    A: LinearOperator + ?Sized,
    M: Preconditioner + ?Sized,
{
    let n = r0.len();
    let nrm = global_norm(red, r0)?;
    let mut v = vec![r0.iter().map(|x| x / nrm).collect::<Vec<_>>()];
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    while v.len() < k {
        m.apply(v.last().unwrap(), &mut z)?;
        a.apply(&z, &mut w)?;
        let (_, hn) = orthogonalize(red, &v, &mut w)?;
        if hn == 0.0 {
            break;
        }
        v.push(w.iter().map(|x| x / hn).collect());
    }
    Ok(v)
}
