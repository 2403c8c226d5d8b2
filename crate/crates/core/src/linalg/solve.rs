//! Front end over the direct and Krylov solvers, with gauge handling.

use super::direct::DirectSolver;
use super::iterative::{cg, gmres, minres};
use super::sparse::{norm, SparseOperator, TripletBuilder};
use crate::error::{Error, Result};

/// Unknown count above which `Auto` switches from the direct to a Krylov solver.
pub const DIRECT_LIMIT: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    /// Direct below [`DIRECT_LIMIT`], else MINRES (symmetric) or GMRES.
    Auto,
    Direct,
    Cg,
    Minres,
    Gmres,
}

/// Constant mode on the dofs `offset, offset + stride, …`.
///
/// The operator must be singular with exactly this kernel (and cokernel).
/// Solutions are returned with zero `weights`-mean on those dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantMode {
    pub stride: usize,
    pub offset: usize,
    /// Per-node gauge weights (e.g. lumped areas); uniform when `None`.
    pub weights: Option<Vec<f64>>,
}

impl ConstantMode {
    pub fn scalar(weights: Option<Vec<f64>>) -> Self {
        ConstantMode {
            stride: 1,
            offset: 0,
            weights,
        }
    }

    fn dofs(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        (self.offset..n).step_by(self.stride)
    }

    /// Removes the weighted mean over the mode's dofs.
    pub fn remove_mean(&self, x: &mut [f64]) {
        let n = x.len();
        let (mut s, mut w) = (0.0, 0.0);
        for (k, i) in self.dofs(n).enumerate() {
            let wk = self.weights.as_ref().map_or(1.0, |ws| ws[k]);
            s += wk * x[i];
            w += wk;
        }
        let mean = s / w;
        for i in self.dofs(n).collect::<Vec<_>>() {
            x[i] -= mean;
        }
    }

    /// Makes `rhs` orthogonal to the (unweighted) constant mode.
    fn make_consistent(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        let idx: Vec<usize> = self.dofs(n).collect();
        let mean = idx.iter().map(|&i| rhs[i]).sum::<f64>() / idx.len() as f64;
        for i in idx {
            rhs[i] -= mean;
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Relative residual tolerance for Krylov methods.
    pub tol: f64,
    pub max_iter: usize,
    /// Unknowns per mesh vertex (node block size for the direct solver).
    pub block: usize,
    pub nullspace: Option<ConstantMode>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: SolveMethod::Auto,
            tol: 1e-10,
            max_iter: 20_000,
            block: 1,
            nullspace: None,
        }
    }
}

impl SolveOptions {
    pub fn block(mut self, b: usize) -> Self {
        self.block = b;
        self
    }

    pub fn nullspace(mut self, mode: ConstantMode) -> Self {
        self.nullspace = Some(mode);
        self
    }

    pub fn method(mut self, m: SolveMethod) -> Self {
        self.method = m;
        self
    }
}

/// Outcome of a linear solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual `‖b − Ax‖ / ‖b‖` of the returned solution (0 for `b = 0`).
    pub residual: f64,
}

enum Backend {
    Direct(DirectSolver),
    Cg,
    Minres,
    Gmres,
}

/// An operator prepared for repeated solves (factored once when direct).
pub struct LinearSolver {
    op: SparseOperator,
    opts: SolveOptions,
    backend: Backend,
}

impl LinearSolver {
    pub fn new(op: SparseOperator, opts: SolveOptions) -> Result<Self> {
        if op.nrows != op.ncols {
            return Err(Error::Contract(format!(
                "solve_linear needs a square operator, got {}x{}",
                op.nrows, op.ncols
            )));
        }
        let backend = match resolve_method(&opts, &op) {
            SolveMethod::Direct => {
                let factored = match &opts.nullspace {
                    Some(mode) => DirectSolver::factor(&pin(&op, mode.offset), opts.block)?,
                    None => DirectSolver::factor(&op, opts.block)?,
                };
                Backend::Direct(factored)
            }
            SolveMethod::Cg => Backend::Cg,
            SolveMethod::Minres => Backend::Minres,
            SolveMethod::Gmres => Backend::Gmres,
            SolveMethod::Auto => unreachable!(),
        };
        Ok(LinearSolver { op, opts, backend })
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.op
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Solution> {
        if rhs.len() != self.op.nrows {
            return Err(Error::Contract(format!(
                "rhs has {} entries, operator {} rows",
                rhs.len(),
                self.op.nrows
            )));
        }
        let mut b = rhs.to_vec();
        if let Some(mode) = &self.opts.nullspace {
            mode.make_consistent(&mut b);
        }
        let bnorm = norm(&b);
        let (mut x, iterations) = match &self.backend {
            Backend::Direct(f) => {
                if let Some(mode) = &self.opts.nullspace {
                    b[mode.offset] = 0.0;
                }
                (f.solve(&b), 1)
            }
            Backend::Cg => {
                let o = cg(&self.op, &b, self.opts.tol, self.opts.max_iter)?;
                (o.x, o.iterations)
            }
            Backend::Minres => {
                let o = minres(&self.op, &b, self.opts.tol, self.opts.max_iter)?;
                (o.x, o.iterations)
            }
            Backend::Gmres => {
                let o = gmres(&self.op, &b, self.opts.tol, self.opts.max_iter, 60)?;
                (o.x, o.iterations)
            }
        };
        if let Some(mode) = &self.opts.nullspace {
            mode.remove_mean(&mut x);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver {
                method: "solve_linear",
                message: "non-finite solution".into(),
                history: vec![],
            });
        }
        let mut r = self.op.matvec(&x);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        if let Some(mode) = &self.opts.nullspace {
            mode.make_consistent(&mut r);
        }
        let residual = if bnorm > 0.0 {
            norm(&r) / bnorm
        } else {
            norm(&r)
        };
        Ok(Solution {
            x,
            iterations,
            residual,
        })
    }
}

/// The method `opts` selects for `op`, with `Auto` resolved.
pub fn resolve_method(opts: &SolveOptions, op: &SparseOperator) -> SolveMethod {
    match opts.method {
        SolveMethod::Auto if op.nrows <= DIRECT_LIMIT => SolveMethod::Direct,
        SolveMethod::Auto if op.symmetric => SolveMethod::Minres,
        SolveMethod::Auto => SolveMethod::Gmres,
        m => m,
    }
}

/// Replaces row and column `k` by the identity row/column.
fn pin(op: &SparseOperator, k: usize) -> SparseOperator {
    let mut t = TripletBuilder::with_capacity(op.nrows, op.ncols, op.nnz());
    for i in 0..op.nrows {
        for (j, v) in op.row(i) {
            if i != k && j != k {
                t.push(i, j, v);
            }
        }
    }
    t.push(k, k, 1.0);
    t.build(op.symmetric)
}

/// One-shot solve of `op · x = rhs`.
pub fn solve_linear(op: &SparseOperator, rhs: &[f64], opts: &SolveOptions) -> Result<Solution> {
    LinearSolver::new(op.clone(), opts.clone())?.solve(rhs)
}
