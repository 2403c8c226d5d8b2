//! P1 surface finite elements on a time slice.

pub mod assembly;

pub use assembly::*;

use crate::error::{Error, Result};
use crate::geometry::SurfaceState;
use crate::mesh::Vec3;

/// Nodal P1 coefficients bound to a mesh slice by their length.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Scalar(Vec<f64>),
    Vector(Vec<Vec3>),
}

impl Field {
    pub fn len(&self) -> usize {
        match self {
            Field::Scalar(v) => v.len(),
            Field::Vector(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn arity(&self) -> usize {
        match self {
            Field::Scalar(_) => 1,
            Field::Vector(_) => 3,
        }
    }

    /// Checks the coefficient count against the slice, and tangency for vectors
    /// when `tangent_tol` is given.
    pub fn check(&self, state: &SurfaceState, tangent_tol: Option<f64>) -> Result<()> {
        if self.len() != state.n_vertices() {
            return Err(Error::Contract(format!(
                "field has {} nodes, mesh has {}",
                self.len(),
                state.n_vertices()
            )));
        }
        if let (Field::Vector(v), Some(tol)) = (self, tangent_tol) {
            let d = state.tangency_defect(v);
            if d > tol {
                return Err(Error::Contract(format!(
                    "vector field not tangential: relative |f·n| = {d:e}"
                )));
            }
        }
        Ok(())
    }

    /// Interleaved coefficients (`3i + k` for vectors).
    pub fn flat(&self) -> Vec<f64> {
        match self {
            Field::Scalar(v) => v.clone(),
            Field::Vector(v) => flatten(v),
        }
    }
}

/// Interleaves a vertex vector field as `[x0, y0, z0, x1, …]`.
pub fn flatten(v: &[Vec3]) -> Vec<f64> {
    v.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

pub fn unflatten(x: &[f64]) -> Vec<Vec3> {
    x.chunks_exact(3)
        .map(|c| Vec3::new(c[0], c[1], c[2]))
        .collect()
}

/// Integration weight: a constant or a nodal P1 function.
#[derive(Debug, Clone, Copy)]
pub enum Coeff<'a> {
    Const(f64),
    Nodal(&'a [f64]),
}

impl Coeff<'_> {
    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        match self {
            Coeff::Const(c) => *c,
            Coeff::Nodal(v) => v[i],
        }
    }

    /// Mean over a face, i.e. the exact face average of the P1 interpolant.
    #[inline]
    pub fn face_mean(&self, tri: &[usize; 3]) -> f64 {
        match self {
            Coeff::Const(c) => *c,
            Coeff::Nodal(v) => (v[tri[0]] + v[tri[1]] + v[tri[2]]) / 3.0,
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            Coeff::Const(c) => *c,
            Coeff::Nodal(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}
