use super::{
    check_sizes, finish, global_norm, residual, KrylovParams, LinearOperator, Preconditioner, SolveReport,
    RESIDUAL_REFRESH,
};
use crate::error::{Error, Result};
use crate::runtime::Reduce;
use crate::sparse::{axpy, dot};

/// BiCGStab(2); see [`bicgstabl`].
pub fn bicgstab2<A, M>(
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
    bicgstabl(red, a, m, b, x, params, 2)
}

enum Outcome {
    Converged,
    Exhausted,
    Breakdown(String),
}

/// Right-preconditioned BiCGStab(L) (Sleijpen & Fokkema). The update is
/// accumulated in preconditioned space and mapped back through `M` only when
/// the residual is refreshed or the solve ends, so each outer iteration
/// costs `2L` operator and preconditioner applications.
///
/// On a breakdown (`rho`, `gamma` or `sigma` vanishing) the method restarts
/// once from the true residual; a second breakdown without an intervening
/// complete iteration is reported.
pub fn bicgstabl<A, M>(
    red: &dyn Reduce,
    a: &A,
    m: &M,
    b: &[f64],
    x: &mut [f64],
    params: &KrylovParams,
    l: usize,
) -> Result<SolveReport>
where
    A: LinearOperator + ?Sized,
    M: Preconditioner + ?Sized,
{
    check_sizes(b, x)?;
    if l == 0 {
        return Err(Error::config("solver.L", "BiCGStab(L) needs L >= 1"));
    }
    let n = b.len();
    let bnorm = global_norm(red, b)?;
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveReport::trivial());
    }
    let tol = params.tol;

    let mut r = vec![vec![0.0; n]; l + 1];
    let mut u = vec![vec![0.0; n]; l + 1];
    let mut zacc = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut rtilde;

    let mut tau = vec![vec![0.0; l + 1]; l + 1];
    let mut sigma = vec![0.0; l + 1];
    let mut gp = vec![0.0; l + 1];
    let mut gm = vec![0.0; l + 1];
    let mut gpp = vec![0.0; l + 1];

    let mut iterations = 0;
    let mut restart_available = true;

    // A M v
    let amv = |v: &[f64], out: &mut [f64], tmp: &mut [f64]| -> Result<()> {
        m.apply(v, tmp)?;
        a.apply(tmp, out)
    };
    // x += M zacc; zacc = 0. A non-finite update (from a breakdown that
    // slipped past the checks) is dropped so x keeps its last good value.
    let flush = |x: &mut [f64], zacc: &mut [f64], tmp: &mut [f64]| -> Result<()> {
        if zacc.iter().all(|v| v.is_finite()) {
            m.apply(zacc, tmp)?;
            axpy(1.0, tmp, x);
        }
        zacc.iter_mut().for_each(|v| *v = 0.0);
        Ok(())
    };

    let outcome = 'restart: loop {
        residual(a, b, x, &mut r[0])?;
        let res0 = global_norm(red, &r[0])?;
        if res0 / bnorm <= tol {
            break Outcome::Converged;
        }
        rtilde = r[0].clone();
        u[0].iter_mut().for_each(|v| *v = 0.0);
        let mut rho0 = 1.0;
        let mut alpha = 0.0;
        let mut omega = 1.0;

        while iterations < params.maxiter {
            iterations += 1;
            rho0 *= -omega;

            for j in 0..l {
                let rho1 = red.sum_scalar(dot(&r[j], &rtilde))?;
                if rho1 == 0.0 || !rho1.is_finite() {
                    flush(x, &mut zacc, &mut tmp)?;
                    if std::mem::take(&mut restart_available) {
                        log::debug!("bicgstab: rho breakdown at iteration {iterations}, restarting");
                        continue 'restart;
                    }
                    break 'restart Outcome::Breakdown(format!("rho = {rho1:e}"));
                }
                let beta = alpha * rho1 / rho0;
                rho0 = rho1;
                for i in 0..=j {
                    let (ui, ri) = (&mut u[i], &r[i]);
                    ui.iter_mut().zip(ri).for_each(|(uv, rv)| *uv = rv - beta * *uv);
                }
                {
                    let (lo, hi) = u.split_at_mut(j + 1);
                    amv(&lo[j], &mut hi[0], &mut tmp)?;
                }
                let gamma = red.sum_scalar(dot(&u[j + 1], &rtilde))?;
                if gamma == 0.0 || !gamma.is_finite() {
                    flush(x, &mut zacc, &mut tmp)?;
                    if std::mem::take(&mut restart_available) {
                        log::debug!("bicgstab: gamma breakdown at iteration {iterations}, restarting");
                        continue 'restart;
                    }
                    break 'restart Outcome::Breakdown(format!("gamma = {gamma:e}"));
                }
                alpha = rho0 / gamma;
                for i in 0..=j {
                    axpy(-alpha, &u[i + 1], &mut r[i]);
                }
                {
                    let (lo, hi) = r.split_at_mut(j + 1);
                    amv(&lo[j], &mut hi[0], &mut tmp)?;
                }
                axpy(alpha, &u[0], &mut zacc);

                // the BiCG half can converge mid-sweep (e.g. with an exact
                // preconditioner); continuing would divide by ~0
                let res = global_norm(red, &r[0])?;
                if res / bnorm <= tol {
                    flush(x, &mut zacc, &mut tmp)?;
                    residual(a, b, x, &mut tmp)?;
                    if global_norm(red, &tmp)? / bnorm <= tol {
                        break 'restart Outcome::Converged;
                    }
                    // recurrence drifted from the true residual; iterations
                    // still bound the loop
                    continue 'restart;
                }
            }

            // minimal residual part: modified Gram-Schmidt on r[1..=L]
            for j in 1..=l {
                for i in 1..j {
                    tau[i][j] = red.sum_scalar(dot(&r[j], &r[i]))? / sigma[i];
                    let (lo, hi) = r.split_at_mut(j);
                    axpy(-tau[i][j], &lo[i], &mut hi[0]);
                }
                let mut s = [dot(&r[j], &r[j]), dot(&r[0], &r[j])];
                red.sum(&mut s)?;
                sigma[j] = s[0];
                if sigma[j] == 0.0 || !sigma[j].is_finite() {
                    flush(x, &mut zacc, &mut tmp)?;
                    if std::mem::take(&mut restart_available) {
                        log::debug!("bicgstab: sigma breakdown at iteration {iterations}, restarting");
                        continue 'restart;
                    }
                    break 'restart Outcome::Breakdown(format!("sigma = {:e}", sigma[j]));
                }
                gp[j] = s[1] / sigma[j];
            }
            gm[l] = gp[l];
            omega = gm[l];
            for j in (1..l).rev() {
                gm[j] = gp[j] - ((j + 1)..=l).map(|i| tau[j][i] * gm[i]).sum::<f64>();
            }
            for j in 1..l {
                gpp[j] = gm[j + 1] + ((j + 1)..l).map(|i| tau[j][i] * gm[i + 1]).sum::<f64>();
            }

            axpy(gm[1], &r[0], &mut zacc);
            {
                let (lo, hi) = r.split_at_mut(l);
                axpy(-gp[l], &hi[0], &mut lo[0]);
            }
            {
                let (lo, hi) = u.split_at_mut(l);
                axpy(-gm[l], &hi[0], &mut lo[0]);
            }
            for j in 1..l {
                {
                    let (lo, hi) = u.split_at_mut(j);
                    axpy(-gm[j], &hi[0], &mut lo[0]);
                }
                axpy(gpp[j], &r[j], &mut zacc);
                {
                    let (lo, hi) = r.split_at_mut(j);
                    axpy(-gp[j], &hi[0], &mut lo[0]);
                }
            }
            restart_available = true;

            if iterations % RESIDUAL_REFRESH == 0 {
                flush(x, &mut zacc, &mut tmp)?;
                residual(a, b, x, &mut r[0])?;
            }
            let res = global_norm(red, &r[0])?;
            if res / bnorm <= tol {
                flush(x, &mut zacc, &mut tmp)?;
                residual(a, b, x, &mut tmp)?;
                if global_norm(red, &tmp)? / bnorm <= tol {
                    break 'restart Outcome::Converged;
                }
                // recurrence drifted; continue from the true residual
                r[0].copy_from_slice(&tmp);
            }
        }
        flush(x, &mut zacc, &mut tmp)?;
        break Outcome::Exhausted;
    };

    let breakdown = match outcome {
        Outcome::Breakdown(msg) => Some(msg),
        Outcome::Converged | Outcome::Exhausted => None,
    };
    finish(red, a, b, x, bnorm, iterations, tol, breakdown)
}
