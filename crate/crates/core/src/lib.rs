//! Tangential two-phase Cahn–Hilliard–Navier–Stokes flow on prescribed
//! evolving closed surfaces, discretised with P1 surface finite elements.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod expr;
pub mod fem;
pub mod io;
pub mod geometry;
pub mod lift;
pub mod linalg;
pub mod mesh;
pub mod oracles;
pub mod physics;
pub mod stepper;

pub use error::{Error, Result};
pub use mesh::{make_icosphere, TriMesh, Vec3};
pub use io::{parse_config, run_to_dir, RunManifest};
pub use oracles::{run_suite, OracleReport, Suite};
pub use stepper::{SimConfig, Simulation, StepState};
