use super::{
    check_sizes, finish, global_norm, residual, KrylovParams, LinearOperator, Preconditioner, SolveReport,
    RESIDUAL_REFRESH,
};
use crate::error::Result;
use crate::runtime::Reduce;
use crate::sparse::{axpy, dot};

/// Preconditioned conjugate gradients for symmetric positive (semi)definite
/// operators.
pub fn cg<A, M>(red: &dyn Reduce, a: &A, m: &M, b: &[f64], x: &mut [f64], params: &KrylovParams) -> Result<SolveReport>
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

    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    residual(a, b, x, &mut r)?;
    m.apply(&r, &mut z)?;
    let mut sums = [dot(&r, &r), dot(&r, &z)];
    red.sum(&mut sums)?;
    if sums[0].sqrt() / bnorm <= tol {
        return finish(red, a, b, x, bnorm, 0, tol, None);
    }
    let mut rz = sums[1];
    let mut p = z.clone();
    let mut breakdown = None;
    let mut iterations = 0;

    while iterations < params.maxiter {
        iterations += 1;
        a.apply(&p, &mut q)?;
        let pq = red.sum_scalar(dot(&p, &q))?;
        if !(pq > 0.0) {
            breakdown = Some(format!("non-positive curvature p'Ap = {pq:e}"));
            break;
        }
        let alpha = rz / pq;
        axpy(alpha, &p, x);
        if iterations % RESIDUAL_REFRESH == 0 {
            residual(a, b, x, &mut r)?;
        } else {
            axpy(-alpha, &q, &mut r);
        }
        m.apply(&r, &mut z)?;
        let mut sums = [dot(&r, &r), dot(&r, &z)];
        red.sum(&mut sums)?;
        if sums[0].sqrt() / bnorm <= tol {
            // confirm against the true residual before stopping
            residual(a, b, x, &mut r)?;
            let rr = global_norm(red, &r)?;
            if rr / bnorm <= tol {
                break;
            }
            m.apply(&r, &mut z)?;
            sums = [rr * rr, red.sum_scalar(dot(&r, &z))?];
        }
        let beta = sums[1] / rz;
        rz = sums[1];
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    finish(red, a, b, x, bnorm, iterations, tol, breakdown)
}
