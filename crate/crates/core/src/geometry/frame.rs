//! Discrete surface Piola transform between two slices with shared connectivity.

use nalgebra::{Matrix2, Matrix2x3, Matrix3x2};

use super::state::{tangent_basis, Mat3, SurfaceState};
use crate::error::{Error, Result};
use crate::mesh::Vec3;

/// Relative normal component tolerated in fields handed to the Piola maps.
pub const TANGENCY_TOL: f64 = 1e-8;

/// Piola data of one face.
#[derive(Debug, Clone, Copy)]
pub struct FaceFrame {
    /// Differential of the face-wise affine map, composed with `P₀`.
    pub d: Mat3,
    /// Inverse differential, composed with `P_t`.
    pub d_minus: Mat3,
    /// Area ratio `|f_t| / |f_0|`.
    pub j: f64,
    pub j_inv: f64,
    pub a: Mat3,
    pub a_inv: Mat3,
    pub n0: Vec3,
    pub nt: Vec3,
}

/// Vertex-level push/pull maps.
#[derive(Debug, Clone, Copy)]
pub struct VertexPiola {
    /// `P_t Ā P₀` with `Ā` the Γ₀-area-weighted mean of the incident `A`.
    pub push: Mat3,
    /// Inverse of `push` between the tangent planes.
    pub pull: Mat3,
    /// Area-weighted mean of the incident `A⁻¹ D⁻ᵀ`, used by the pullback gradient.
    pub grad: Mat3,
}

/// Piola frame from Γ₀ to Γ(t).
#[derive(Debug, Clone)]
pub struct FlowFrame {
    pub faces: Vec<FaceFrame>,
    pub vertices: Vec<VertexPiola>,
}

impl FlowFrame {
    /// Builds the frame taking `state0` to `state_t`.
    pub fn new(state0: &SurfaceState, state_t: &SurfaceState) -> Result<Self> {
        compute_flow_frame(state0, state_t)
    }
}

/// Face and vertex Piola data between two slices.
pub fn compute_flow_frame(state0: &SurfaceState, state_t: &SurfaceState) -> Result<FlowFrame> {
    let mesh = &state0.mesh;
    if !std::sync::Arc::ptr_eq(mesh, &state_t.mesh) && mesh.faces != state_t.mesh.faces {
        return Err(Error::Contract("slices do not share connectivity".into()));
    }
    let mut faces = Vec::with_capacity(mesh.n_faces());
    for (f, &[a, b, c]) in mesh.faces.iter().enumerate() {
        let (x0, xt) = (&state0.positions, &state_t.positions);
        let e0 = Matrix3x2::from_columns(&[x0[b] - x0[a], x0[c] - x0[a]]);
        let et = Matrix3x2::from_columns(&[xt[b] - xt[a], xt[c] - xt[a]]);
        let g0 = (e0.transpose() * e0).try_inverse();
        let gt = (et.transpose() * et).try_inverse();
        let (Some(g0), Some(gt)) = (g0, gt) else {
            return Err(Error::Geometry(format!("face {f} collapsed")));
        };
        let d = et * g0 * e0.transpose();
        let d_minus = e0 * gt * et.transpose();
        let (f0, ft) = (&state0.faces[f], &state_t.faces[f]);
        let j = ft.area / f0.area;
        if !(j > 0.0 && j.is_finite()) {
            return Err(Error::Geometry(format!("face {f} collapsed (J = {j})")));
        }
        let (n0, nt) = (f0.normal, ft.normal);
        let a_mat = d / j + nt * n0.transpose();
        let a_inv = d_minus * j + n0 * nt.transpose();
        faces.push(FaceFrame {
            d,
            d_minus,
            j,
            j_inv: 1.0 / j,
            a: a_mat,
            a_inv,
            n0,
            nt,
        });
    }

    let mut vertices = Vec::with_capacity(mesh.n_vertices());
    for i in 0..mesh.n_vertices() {
        let mut abar = Mat3::zeros();
        let mut gbar = Mat3::zeros();
        let mut wsum = 0.0;
        for &f in &mesh.vertex_faces[i] {
            let w = state0.faces[f].area;
            abar += faces[f].a * w;
            gbar += faces[f].a_inv * faces[f].d_minus.transpose() * w;
            wsum += w;
        }
        abar /= wsum;
        gbar /= wsum;
        let (s1, s2) = tangent_basis(&state0.normals[i]);
        let (u1, u2) = tangent_basis(&state_t.normals[i]);
        let t0 = Matrix3x2::from_columns(&[s1, s2]);
        let tt = Matrix3x2::from_columns(&[u1, u2]);
        let b: Matrix2<f64> = tt.transpose() * abar * t0;
        let Some(b_inv) = b.try_inverse() else {
            return Err(Error::Geometry(format!("vertex {i}: singular Piola map")));
        };
        let tt_t: Matrix2x3<f64> = tt.transpose();
        let p0 = state0.projectors[i];
        vertices.push(VertexPiola {
            push: tt * b * t0.transpose(),
            pull: t0 * b_inv * tt_t,
            grad: p0 * gbar,
        });
    }
    Ok(FlowFrame { faces, vertices })
}

fn check_tangent(field: &[Vec3], normals: &[Vec3], side: &str) -> Result<()> {
    let scale = field.iter().map(|f| f.norm()).fold(0.0, f64::max);
    for (i, (f, n)) in field.iter().zip(normals).enumerate() {
        if f.dot(n).abs() > TANGENCY_TOL * scale {
            return Err(Error::Contract(format!(
                "{side} field not tangential at vertex {i}: |f·n| = {:e}",
                f.dot(n).abs()
            )));
        }
    }
    Ok(())
}

/// Pushes a tangent field on Γ₀ forward to Γ(t).
pub fn piola_push(frame: &FlowFrame, state0: &SurfaceState, field0: &[Vec3]) -> Result<Vec<Vec3>> {
    check_tangent(field0, &state0.normals, "Γ₀")?;
    Ok(frame
        .vertices
        .iter()
        .zip(field0)
        .map(|(v, f)| v.push * f)
        .collect())
}

/// Pulls a tangent field on Γ(t) back to Γ₀; exact inverse of [`piola_push`].
pub fn piola_pull(
    frame: &FlowFrame,
    state_t: &SurfaceState,
    field_t: &[Vec3],
) -> Result<Vec<Vec3>> {
    check_tangent(field_t, &state_t.normals, "Γ(t)")?;
    Ok(frame
        .vertices
        .iter()
        .zip(field_t)
        .map(|(v, f)| v.pull * f)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_icosphere;
    use std::sync::Arc;

    fn unit(s: u32) -> SurfaceState {
        let mesh = Arc::new(make_icosphere(s, 1.0).unwrap());
        SurfaceState::at_rest(mesh.clone(), mesh.vertices.clone(), 0.0).unwrap()
    }

    fn scaled(st: &SurfaceState, r: f64) -> SurfaceState {
        let pos = st.positions.iter().map(|x| x * r).collect();
        SurfaceState::at_rest(st.mesh.clone(), pos, 0.0).unwrap()
    }

    fn rotation(st: &SurfaceState) -> Vec<Vec3> {
        st.positions.iter().map(|x| Vec3::z().cross(x)).collect()
    }

    #[test]
    fn identity_frame() {
        let st = unit(2);
        let fr = compute_flow_frame(&st, &st).unwrap();
        for (ff, fg) in fr.faces.iter().zip(&st.faces) {
            assert!((ff.d - fg.projector()).norm() < 1e-12);
            assert!((ff.j - 1.0).abs() < 1e-12);
            assert!((ff.a - Mat3::identity()).norm() < 1e-12);
        }
        let u = rotation(&st);
        let pushed = piola_push(&fr, &st, &u).unwrap();
        for (a, b) in pushed.iter().zip(&u) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn radial_frame_faces() {
        let st = unit(3);
        let big = scaled(&st, 2.0);
        let fr = compute_flow_frame(&st, &big).unwrap();
        for (ff, fg) in fr.faces.iter().zip(&st.faces) {
            assert!((ff.j - 4.0).abs() < 1e-10);
            let (t1, t2) = tangent_basis(&fg.normal);
            for t in [t1, t2] {
                assert!((ff.a * t - t / 2.0).norm() < 1e-10);
            }
            // det A = 1/J, here 1/4
            assert!((ff.a.determinant() * ff.j - 1.0).abs() < 1e-10);
            assert!((ff.j * ff.j_inv - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_frame_vertices_are_close_to_closed_form() {
        // Face averaging leaves an O(h²) deviation from the exact 1/R law.
        let mut errs = Vec::new();
        for s in [2, 3, 4] {
            let st = unit(s);
            let big = scaled(&st, 2.0);
            let fr = compute_flow_frame(&st, &big).unwrap();
            let u = rotation(&st);
            let pushed = piola_push(&fr, &st, &u).unwrap();
            let e = pushed
                .iter()
                .zip(&u)
                .map(|(a, b)| (a - b / 2.0).norm())
                .fold(0.0, f64::max);
            let back = piola_pull(&fr, &big, &pushed).unwrap();
            let e_back = back
                .iter()
                .zip(&u)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(e_back < 1e-12);
            errs.push(e);
        }
        assert!(errs[2] < 2e-3, "{errs:?}");
        assert!(errs[0] / errs[2] > 10.0, "{errs:?}");
    }

    #[test]
    fn pull_doubles_on_radial_frame() {
        let st = unit(4);
        let big = scaled(&st, 2.0);
        let fr = compute_flow_frame(&st, &big).unwrap();
        // half the unit-sphere rotation, expressed with radius-2 positions
        let v: Vec<Vec3> = big
            .positions
            .iter()
            .map(|x| Vec3::z().cross(x) / 4.0)
            .collect();
        let back = piola_pull(&fr, &big, &v).unwrap();
        let e = back
            .iter()
            .zip(&st.positions)
            .map(|(b, x)| (b - Vec3::z().cross(x)).norm())
            .fold(0.0, f64::max);
        assert!(e < 4e-3, "{e}");
    }

    #[test]
    fn normal_input_is_rejected() {
        let st = unit(1);
        let fr = compute_flow_frame(&st, &st).unwrap();
        let bad = st.positions.clone();
        assert!(matches!(
            piola_push(&fr, &st, &bad),
            Err(Error::Contract(_))
        ));
    }
}
