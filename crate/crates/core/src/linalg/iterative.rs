//! Krylov solvers: preconditioned CG, MINRES and restarted GMRES.

use super::sparse::{dot, norm, SparseOperator};
use crate::error::{Error, Result};

/// Result of a converged Krylov solve.
#[derive(Debug, Clone)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual estimate after each iteration.
    pub history: Vec<f64>,
    /// False only from [`gmres_preconditioned`] when the cap was reached.
    pub converged: bool,
}

fn jacobi(a: &SparseOperator) -> Vec<f64> {
    a.diagonal()
        .iter()
        .map(|d| if d.abs() > 0.0 { 1.0 / d.abs() } else { 1.0 })
        .collect()
}

fn fail(method: &'static str, message: String, history: Vec<f64>) -> Error {
    Error::Solver {
        method,
        message,
        history,
    }
}

/// Jacobi-preconditioned conjugate gradients for SPD (or SPSD, consistent) systems.
pub fn cg(a: &SparseOperator, b: &[f64], tol: f64, max_iter: usize) -> Result<KrylovOutcome> {
    let n = b.len();
    let minv = jacobi(a);
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(KrylovOutcome {
            x,
            iterations: 0,
            history: vec![0.0],
            converged: true,
        });
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    for it in 1..=max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(fail("cg", format!("breakdown pᵀAp = {pap:e}"), history));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm(&r) / bnorm;
        history.push(rel);
        if rel <= tol {
            return Ok(KrylovOutcome {
                x,
                iterations: it,
                history,
                converged: true,
            });
        }
        for i in 0..n {
            z[i] = r[i] * minv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(fail(
        "cg",
        format!("no convergence in {max_iter} iterations"),
        history,
    ))
}

/// MINRES for symmetric (possibly indefinite) systems with an SPD diagonal
/// preconditioner built from `|diag(A)|`.
pub fn minres(a: &SparseOperator, b: &[f64], tol: f64, max_iter: usize) -> Result<KrylovOutcome> {
    let n = b.len();
    let minv = jacobi(a);
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&minv).map(|(v, m)| v * m).collect() };
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(KrylovOutcome {
            x,
            iterations: 0,
            history: vec![0.0],
            converged: true,
        });
    }
    let mut r1 = b.to_vec();
    let mut y = precond(&r1);
    let beta1 = dot(&r1, &y);
    if !(beta1 > 0.0) {
        return Err(fail("minres", "indefinite preconditioner".into(), vec![]));
    }
    let beta1 = beta1.sqrt();
    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut history = Vec::new();
    for it in 1..=max_iter {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|yi| yi * s).collect();
        let mut yv = a.matvec(&v);
        if it >= 2 {
            let f = beta / oldb;
            for i in 0..n {
                yv[i] -= f * r1[i];
            }
        }
        let alfa = dot(&v, &yv);
        let f = alfa / beta;
        for i in 0..n {
            yv[i] -= f * r2[i];
        }
        r1 = std::mem::replace(&mut r2, yv);
        y = precond(&r2);
        oldb = beta;
        let bb = dot(&r2, &y);
        if bb < 0.0 {
            return Err(fail("minres", "indefinite preconditioner".into(), history));
        }
        beta = bb.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
        w = (0..n)
            .map(|i| (v[i] - oldeps * w1[i] - delta * w2[i]) * denom)
            .collect();
        for i in 0..n {
            x[i] += phi * w[i];
        }
        // phibar estimates the preconditioned residual norm
        let rel = phibar / beta1;
        history.push(rel);
        if rel <= tol || beta == 0.0 {
            let res: Vec<f64> = a.matvec(&x).iter().zip(b).map(|(p, q)| q - p).collect();
            let true_rel = norm(&res) / bnorm;
            if true_rel <= tol.max(1e-14) * 10.0 || beta == 0.0 {
                return Ok(KrylovOutcome {
                    x,
                    iterations: it,
                    history,
                    converged: true,
                });
            }
        }
    }
    Err(fail(
        "minres",
        format!("no convergence in {max_iter} iterations"),
        history,
    ))
}

/// Restarted GMRES(m) with left Jacobi preconditioning, for nonsymmetric systems.
pub fn gmres(
    a: &SparseOperator,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> Result<KrylovOutcome> {
    let minv = jacobi(a);
    let scale = |v: Vec<f64>| -> Vec<f64> { v.iter().zip(&minv).map(|(p, m)| p * m).collect() };
    let o = gmres_preconditioned(a, b, scale, None, tol, max_iter, restart)?;
    if !o.converged {
        return Err(fail(
            "gmres",
            format!("no convergence in {max_iter} iterations"),
            o.history,
        ));
    }
    Ok(o)
}

/// Restarted GMRES(m) on `M⁻¹ A x = M⁻¹ b`, starting from `x0` (zero if
/// `None`). `tol` bounds the preconditioned relative residual; hitting
/// `max_iter` first returns the last iterate with `converged == false`.
pub fn gmres_preconditioned(
    a: &SparseOperator,
    b: &[f64],
    precond: impl Fn(Vec<f64>) -> Vec<f64>,
    x0: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> Result<KrylovOutcome> {
    let n = b.len();
    let apply = |v: &[f64]| -> Vec<f64> { precond(a.matvec(v)) };
    let pb = precond(b.to_vec());
    let pbnorm = norm(&pb);
    let mut x = x0.unwrap_or_else(|| vec![0.0; n]);
    let mut history = Vec::new();
    if pbnorm == 0.0 {
        return Ok(KrylovOutcome {
            x: vec![0.0; n],
            iterations: 0,
            history: vec![0.0],
            converged: true,
        });
    }
    let m = restart.max(1);
    let mut total = 0;
    while total < max_iter {
        let ax = apply(&x);
        let r: Vec<f64> = pb.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm(&r);
        if beta / pbnorm <= tol {
            return Ok(KrylovOutcome {
                x,
                iterations: total,
                history,
                converged: true,
            });
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            total += 1;
            let mut w = apply(&v[k]);
            for (j, vj) in v.iter().enumerate() {
                h[j][k] = dot(&w, vj);
                for i in 0..n {
                    w[i] -= h[j][k] * vj[i];
                }
            }
            h[k + 1][k] = norm(&w);
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let den = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            let hk1 = h[k + 1][k];
            if den > 0.0 {
                cs[k] = h[k][k] / den;
                sn[k] = hk1 / den;
            } else {
                cs[k] = 1.0;
                sn[k] = 0.0;
            }
            h[k][k] = cs[k] * h[k][k] + sn[k] * hk1;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            let rel = g[k + 1].abs() / pbnorm;
            history.push(rel);
            if rel <= tol || hk1 == 0.0 || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|wi| wi / hk1).collect());
        }
        let mut yk = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * yk[j];
            }
            yk[i] = s / h[i][i];
        }
        for (j, yj) in yk.iter().enumerate() {
            for i in 0..n {
                x[i] += yj * v[j][i];
            }
        }
        if history.last().is_some_and(|&r| r <= tol) {
            return Ok(KrylovOutcome {
                x,
                iterations: total,
                history,
                converged: true,
            });
        }
    }
    Ok(KrylovOutcome {
        x,
        iterations: total,
        history,
        converged: false,
    })
}
