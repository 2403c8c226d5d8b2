//! Integration of the normal flow `x' = v_n n` with classical RK4.

use super::preset::GeometryPreset;
use super::state::{BaseGeometry, SurfaceState};
use crate::error::{Error, Result};
use crate::mesh::{TriMesh, Vec3};

/// Default minimum radius ratio below which a step is rejected.
pub const MIN_RADIUS_RATIO: f64 = 0.2;

/// Vertex velocities `v_n n` with the inextensibility-corrected `v_n`.
pub fn normal_flow_velocity(
    mesh: &TriMesh,
    positions: &[Vec3],
    t: f64,
    preset: &GeometryPreset,
) -> Result<Vec<Vec3>> {
    let base = BaseGeometry::compute(mesh, positions)?;
    let raw: Vec<f64> = positions
        .iter()
        .map(|x| preset.raw_normal_velocity(x, t))
        .collect();
    let vn = base.enforce_inextensibility(&raw)?;
    Ok(base.normals.iter().zip(&vn).map(|(n, v)| n * *v).collect())
}

/// One RK4 step of the normal flow from `state` over `dt`.
///
/// Normals and the corrected normal velocity are recomputed at every stage.
/// Fails when the smallest radius ratio drops below `min_quality`.
pub fn advance_positions(
    state: &SurfaceState,
    preset: &GeometryPreset,
    dt: f64,
    min_quality: f64,
) -> Result<Vec<Vec3>> {
    if !(dt > 0.0) {
        return Err(Error::Contract(format!("dt = {dt} must be positive")));
    }
    if preset.is_stationary() {
        return Ok(state.positions.clone());
    }
    let mesh = &*state.mesh;
    let x0 = &state.positions;
    let t = state.t;
    let stage = |base: &[Vec3], k: &[Vec3], c: f64| -> Vec<Vec3> {
        base.iter().zip(k).map(|(x, v)| x + v * c).collect()
    };
    let k1 = normal_flow_velocity(mesh, x0, t, preset)?;
    let k2 = normal_flow_velocity(mesh, &stage(x0, &k1, 0.5 * dt), t + 0.5 * dt, preset)?;
    let k3 = normal_flow_velocity(mesh, &stage(x0, &k2, 0.5 * dt), t + 0.5 * dt, preset)?;
    let k4 = normal_flow_velocity(mesh, &stage(x0, &k3, dt), t + dt, preset)?;
    let next: Vec<Vec3> = (0..x0.len())
        .map(|i| x0[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0))
        .collect();
    let (q, f) = mesh.min_radius_ratio(&next);
    if q < min_quality {
        return Err(Error::Geometry(format!(
            "mesh quality {q:.4} at face {f} fell below {min_quality} at t = {}",
            t + dt
        )));
    }
    Ok(next)
}

/// Evolves `mesh.vertices` from `t0` over `steps` steps of size `dt`.
pub fn evolve(
    mesh: std::sync::Arc<TriMesh>,
    preset: &GeometryPreset,
    t0: f64,
    dt: f64,
    steps: usize,
) -> Result<SurfaceState> {
    let mut st = SurfaceState::compute(mesh.clone(), mesh.vertices.clone(), t0, preset)?;
    for _ in 0..steps {
        let next = advance_positions(&st, preset, dt, MIN_RADIUS_RATIO)?;
        st = SurfaceState::compute(mesh.clone(), next, st.t + dt, preset)?;
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_icosphere;
    use std::sync::Arc;

    #[test]
    fn stationary_and_zero_amplitude_do_not_move() {
        let mesh = Arc::new(make_icosphere(2, 1.0).unwrap());
        let still = GeometryPreset::StationarySphere { radius: 1.0 };
        let st = SurfaceState::compute(mesh.clone(), mesh.vertices.clone(), 0.0, &still).unwrap();
        assert_eq!(
            advance_positions(&st, &still, 0.3, 0.2).unwrap(),
            st.positions
        );

        let flat = GeometryPreset::OscillatingHarmonicSphere {
            radius: 1.0,
            amplitude: 0.0,
            frequency: 6.0,
            l: 2,
            m: 0,
        };
        assert_eq!(
            advance_positions(&st, &flat, 0.3, 0.2).unwrap(),
            st.positions
        );
    }

    #[test]
    fn rk4_self_convergence_over_one_period() {
        let mesh = Arc::new(make_icosphere(2, 1.0).unwrap());
        let p = GeometryPreset::oscillating_default();
        let run = |n: usize| {
            evolve(mesh.clone(), &p, 0.0, 1.0 / n as f64, n)
                .unwrap()
                .positions
        };
        let coarse = run(20);
        let half = run(40);
        let reference = run(200);
        let err = |a: &[Vec3]| {
            a.iter()
                .zip(&reference)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(&coarse), err(&half));
        assert!(e1 < 1e-6, "dt = 1/20 error {e1}");
        assert!(e1 / e2 >= 12.0, "halving ratio {}", e1 / e2);
    }

    #[test]
    fn area_is_conserved_by_the_corrected_flow() {
        let mesh = Arc::new(make_icosphere(3, 1.0).unwrap());
        let p = GeometryPreset::oscillating_default();
        let a0 = SurfaceState::compute(mesh.clone(), mesh.vertices.clone(), 0.0, &p)
            .unwrap()
            .area;
        let st = evolve(mesh, &p, 0.0, 0.01, 25).unwrap();
        assert!(((st.area - a0) / a0).abs() < 1e-7, "{}", st.area - a0);
        assert!(st.constraint_residual() < 1e-12);
    }

    #[test]
    fn quality_guard_trips() {
        let mesh = Arc::new(make_icosphere(1, 1.0).unwrap());
        let p = GeometryPreset::OscillatingHarmonicSphere {
            radius: 1.0,
            amplitude: 0.05,
            frequency: 1.0,
            l: 2,
            m: 0,
        };
        let st = SurfaceState::compute(mesh.clone(), mesh.vertices.clone(), 0.0, &p).unwrap();
        assert!(matches!(
            advance_positions(&st, &p, 0.01, 0.99),
            Err(Error::Geometry(_))
        ));
    }
}
