//! Factorizations reused across nearby operators.
//!
//! A factor of a previous operator preconditions GMRES on the current one.
//! While that takes few iterations the factor is kept; otherwise the current
//! operator is factored on the next solve.

use std::sync::Arc;

use super::direct::DirectSolver;
use super::iterative::gmres_preconditioned;
use super::solve::{resolve_method, LinearSolver, Solution, SolveMethod, SolveOptions};
use super::sparse::{norm, SparseOperator};
use crate::error::{Error, Result};

/// GMRES iterations after which the factor counts as stale.
const STALE_ITERS: usize = 6;
/// Iteration cap for one preconditioned solve.
const MAX_ITERS: usize = 30;

/// A direct factorization kept between solves with slowly varying operators.
#[derive(Clone)]
pub struct FactorCache {
    opts: SolveOptions,
    factor: Option<Arc<DirectSolver>>,
    stale: bool,
    /// Number of factorizations performed so far.
    pub factorizations: usize,
}

impl FactorCache {
    /// `opts.tol` bounds the preconditioned relative residual and `opts.block`
    /// is the factorization's node block. Operators that `opts.method` sends to
    /// a Krylov method bypass the cache.
    pub fn new(opts: SolveOptions) -> Self {
        FactorCache {
            opts,
            factor: None,
            stale: false,
            factorizations: 0,
        }
    }

    /// Drops the factor so the next solve refactors.
    pub fn invalidate(&mut self) {
        self.factor = None;
    }

    /// Solves `a x = b`.
    pub fn solve(&mut self, a: &SparseOperator, b: &[f64]) -> Result<Solution> {
        if a.nrows != a.ncols || b.len() != a.nrows {
            return Err(Error::Contract(format!(
                "cannot solve {}x{} with {} right-hand side entries",
                a.nrows,
                a.ncols,
                b.len()
            )));
        }
        if self.opts.nullspace.is_some() || resolve_method(&self.opts, a) != SolveMethod::Direct {
            return LinearSolver::new(a.clone(), self.opts.clone())?.solve(b);
        }
        if self.stale {
            self.factor = None;
        }
        if let Some(f) = self.factor.clone() {
            if let Ok(o) = gmres_preconditioned(
                a,
                b,
                |r| f.solve(&r),
                None,
                self.opts.tol,
                MAX_ITERS,
                MAX_ITERS,
            ) {
                if o.converged {
                    self.stale = o.iterations > STALE_ITERS;
                    return finish(a, b, o.x, o.iterations);
                }
            }
        }
        let f = Arc::new(DirectSolver::factor(a, self.opts.block)?);
        self.factorizations += 1;
        let o = gmres_preconditioned(
            a,
            b,
            |r| f.solve(&r),
            None,
            self.opts.tol,
            MAX_ITERS,
            MAX_ITERS,
        )?;
        // a fresh factor that stalls short of `tol` still gives its best
        // iterate, as a plain direct solve would; the residual is reported
        self.factor = Some(f);
        self.stale = false;
        finish(a, b, o.x, o.iterations)
    }
}

fn finish(a: &SparseOperator, b: &[f64], x: Vec<f64>, iterations: usize) -> Result<Solution> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver {
            method: "factor cache",
            message: "non-finite solution".into(),
            history: vec![],
        });
    }
    let ax = a.matvec(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let bn = norm(b);
    let residual = if bn > 0.0 { norm(&r) / bn } else { norm(&r) };
    Ok(Solution {
        x,
        iterations,
        residual,
    })
}
