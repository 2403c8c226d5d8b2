//! Sparse matrices and linear solvers.

pub mod direct;
pub mod iterative;
pub mod reuse;
pub mod solve;
pub mod sparse;

pub use direct::{block_graph, nested_dissection, DirectSolver};
pub use reuse::FactorCache;
pub use solve::{
    resolve_method, solve_linear, ConstantMode, LinearSolver, Solution, SolveMethod, SolveOptions,
};
pub use sparse::{dot, norm, SparseOperator, TripletBuilder};
