//! Semi-implicit Cahn–Hilliard step on a slice.
//!
//! With lumped masses `M⁰` (previous slice) and `M` (this slice):
//!
//! ```text
//! (M φ − M⁰ φ⁰)/dt + K μ − a(φ⁰, v) = 0,     a_j = ∫ φ⁰ v·∇ψ_j
//! M μ = K φ + M (Ψ_convex'(φ) + Ψ_concave'(φ⁰))
//! ```
//!
//! The transport term is the explicit conservative flux, so the constant test
//! function gives `Σ Mφ = Σ M⁰φ⁰` exactly. The convex part is resolved by
//! Newton's method.

use crate::error::{Error, Result};
use crate::fem::{advection, stiffness, Coeff};
use crate::geometry::SurfaceState;
use crate::linalg::{FactorCache, SolveOptions, SparseOperator, TripletBuilder};
use crate::mesh::Vec3;
use crate::physics::PotentialSpec;

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    /// Stop when `max|Δφ| ≤ tol · max(1, max|φ|)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChOutcome {
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub newton_iters: usize,
    /// Nodes with `|φ| ≥ 1` when the potential is logarithmic.
    pub out_of_range: usize,
}

/// One step from `phi_prev` (nodal values carried from the previous slice with
/// lumped masses `prev_lumped`) to `state`, transported by `v_total`.
#[allow(clippy::too_many_arguments)]
pub fn step_cahn_hilliard(
    state: &SurfaceState,
    v_total: &[Vec3],
    phi_prev: &[f64],
    prev_lumped: &[f64],
    dt: f64,
    spec: &PotentialSpec,
    solve: &SolveOptions,
    newton: &NewtonOptions,
) -> Result<ChOutcome> {
    let mut cache = FactorCache::new(solve.clone().block(2));
    step_cahn_hilliard_cached(
        state,
        v_total,
        phi_prev,
        prev_lumped,
        dt,
        spec,
        newton,
        &mut cache,
    )
}

/// [`step_cahn_hilliard`] with Newton systems solved through `cache`, which
/// may hold a factor from earlier iterations or steps.
#[allow(clippy::too_many_arguments)]
pub fn step_cahn_hilliard_cached(
    state: &SurfaceState,
    v_total: &[Vec3],
    phi_prev: &[f64],
    prev_lumped: &[f64],
    dt: f64,
    spec: &PotentialSpec,
    newton: &NewtonOptions,
    cache: &mut FactorCache,
) -> Result<ChOutcome> {
    let nv = state.n_vertices();
    if phi_prev.len() != nv || prev_lumped.len() != nv || v_total.len() != nv {
        return Err(Error::Contract(
            "Cahn–Hilliard inputs do not match the mesh".into(),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::Contract(format!("dt = {dt} must be positive")));
    }
    let k = stiffness(state, Coeff::Const(1.0));
    let m = &state.lumped_area;

    let flux = if v_total.iter().all(|v| *v == Vec3::zeros()) {
        vec![0.0; nv]
    } else {
        advection(state, v_total, Coeff::Const(1.0)).matvec_transpose(phi_prev)
    };
    // r1 = M⁰φ⁰ + dt a ; r2 base = −M Ψ_concave'(φ⁰)
    let r1: Vec<f64> = (0..nv)
        .map(|i| prev_lumped[i] * phi_prev[i] + dt * flux[i])
        .collect();
    let concave: Vec<f64> = (0..nv)
        .map(|i| -m[i] * spec.concave(1, phi_prev[i]))
        .collect();

    let mut phi = phi_prev.to_vec();
    let mut mu = vec![0.0; nv];
    let mut iters = 0;
    loop {
        iters += 1;
        let s: Vec<f64> = phi.iter().map(|&p| spec.convex(2, p)).collect();
        let op = mixed_operator(&k, m, &s, dt);
        let mut rhs = vec![0.0; 2 * nv];
        for i in 0..nv {
            rhs[2 * i] = concave[i] - m[i] * (spec.convex(1, phi[i]) - s[i] * phi[i]);
            rhs[2 * i + 1] = -r1[i];
        }
        // increment form, so the linear tolerance is relative to the update
        let x: Vec<f64> = phi.iter().zip(&mu).flat_map(|(p, m)| [*p, *m]).collect();
        let ox = op.matvec(&x);
        rhs.iter_mut().zip(&ox).for_each(|(r, o)| *r -= o);
        let dx = cache.solve(&op, &rhs)?.x;
        let mut change = 0.0f64;
        let mut scale = 1.0f64;
        for i in 0..nv {
            change = change.max(dx[2 * i].abs());
            phi[i] += dx[2 * i];
            mu[i] += dx[2 * i + 1];
            scale = scale.max(phi[i].abs());
        }
        if phi.iter().chain(&mu).any(|v| !v.is_finite()) {
            return Err(Error::Solver {
                method: "cahn-hilliard newton",
                message: "non-finite iterate".into(),
                history: vec![change],
            });
        }
        if change <= newton.tol * scale {
            break;
        }
        if iters >= newton.max_iter {
            return Err(Error::Solver {
                method: "cahn-hilliard newton",
                message: format!("no convergence in {iters} iterations"),
                history: vec![change],
            });
        }
    }
    let out_of_range = if spec.kind == crate::physics::PotentialKind::RegularizedLog {
        phi.iter().filter(|p| p.abs() >= 1.0).count()
    } else {
        0
    };
    Ok(ChOutcome {
        phi,
        mu,
        newton_iters: iters,
        out_of_range,
    })
}

/// `[[K + M S, −M], [−M, −dt K]]` interleaved as `2i + {φ, μ}`.
fn mixed_operator(k: &SparseOperator, m: &[f64], s: &[f64], dt: f64) -> SparseOperator {
    let nv = m.len();
    let mut t = TripletBuilder::with_capacity(2 * nv, 2 * nv, 2 * k.nnz() + 3 * nv);
    t.push_operator(k, 1.0, |i| 2 * i, |j| 2 * j);
    t.push_operator(k, -dt, |i| 2 * i + 1, |j| 2 * j + 1);
    for i in 0..nv {
        t.push(2 * i, 2 * i, m[i] * s[i]);
        t.push(2 * i, 2 * i + 1, -m[i]);
        t.push(2 * i + 1, 2 * i, -m[i]);
    }
    t.build(true)
}

/// Lumped Cahn–Hilliard energy `Σ mᵢ Ψ(φᵢ) + ½ φᵀKφ`, split as (potential, gradient).
pub fn ch_energy(state: &SurfaceState, phi: &[f64], spec: &PotentialSpec) -> (f64, f64) {
    let pot = phi
        .iter()
        .zip(&state.lumped_area)
        .map(|(p, m)| m * spec.psi(*p))
        .sum();
    let grad = 0.5 * stiffness(state, Coeff::Const(1.0)).bilinear(phi, phi);
    (pot, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_icosphere;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn sphere(s: u32) -> SurfaceState {
        let mesh = Arc::new(make_icosphere(s, 1.0).unwrap());
        SurfaceState::at_rest(mesh.clone(), mesh.vertices.clone(), 0.0).unwrap()
    }

    fn run(st: &SurfaceState, phi: &[f64], v: &[Vec3], dt: f64, spec: &PotentialSpec) -> ChOutcome {
        step_cahn_hilliard(
            st,
            v,
            phi,
            &st.lumped_area,
            dt,
            spec,
            &SolveOptions::default(),
            &NewtonOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn constant_state_is_a_fixed_point() {
        let st = sphere(3);
        let nv = st.n_vertices();
        for spec in [PotentialSpec::default(), PotentialSpec::quartic()] {
            let out = run(&st, &vec![0.3; nv], &vec![Vec3::zeros(); nv], 1e-2, &spec);
            for (p, m) in out.phi.iter().zip(&out.mu) {
                assert!((p - 0.3).abs() < 1e-12);
                assert!((m - spec.psi_d1(0.3)).abs() < 1e-10);
            }
        }
    }

    /// Per-mode scalar ODE: φ' = −λ(λ + Ψ''(0))φ integrated by one implicit
    /// step has the factor 1/(1 + dt λ(λ + Ψ''(0))) with λ = 2 for z.
    #[test]
    fn linearised_quartic_matches_scalar_ode() {
        let st = sphere(4);
        let spec = PotentialSpec::quartic();
        let eps = 1e-6;
        let dt = 1e-2;
        let phi: Vec<f64> = st.positions.iter().map(|x| eps * x.z).collect();
        let z: Vec<f64> = st.positions.iter().map(|x| x.z).collect();
        let out = run(&st, &phi, &vec![Vec3::zeros(); phi.len()], dt, &spec);
        let coef = st.vertex_integral(&out.phi, &z) / st.vertex_integral(&phi, &z);
        let lambda = 2.0;
        let oracle = 1.0 / (1.0 + dt * lambda * (lambda + spec.psi_d2(0.0)));
        assert!(
            ((coef - oracle) / oracle).abs() < 1e-3,
            "{coef} vs {oracle}"
        );
    }

    #[test]
    fn energy_decreases_on_a_stationary_surface() {
        let st = sphere(3);
        let spec = PotentialSpec::default();
        let mut phi: Vec<f64> = st
            .positions
            .iter()
            .map(|x| 0.6 * (3.0 * x.x).sin() * (2.0 * x.z).cos())
            .collect();
        let zero = vec![Vec3::zeros(); phi.len()];
        let e = |p: &[f64]| {
            let (a, b) = ch_energy(&st, p, &spec);
            a + b
        };
        let mut last = e(&phi);
        for _ in 0..20 {
            phi = run(&st, &phi, &zero, 5e-3, &spec).phi;
            let now = e(&phi);
            assert!(now <= last + 1e-12 * last.abs().max(1.0), "{now} > {last}");
            last = now;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn mass_is_conserved_under_transport(a in -0.8f64..0.8, w in -2.0f64..2.0, dt in 1e-4f64..1e-1) {
            let st = sphere(2);
            let phi: Vec<f64> = st.positions.iter().map(|x| a * x.z + 0.2 * x.x * x.y).collect();
            let v: Vec<Vec3> = st.positions.iter().map(|x| Vec3::new(-x.y, x.x, 0.0) * w + Vec3::new(0.0, -x.z, x.y)).collect();
            let out = run(&st, &phi, &v, dt, &PotentialSpec::default());
            let mass = |p: &[f64]| p.iter().zip(&st.lumped_area).map(|(p, m)| p * m).sum::<f64>();
            let (before, after) = (mass(&phi), mass(&out.phi));
            prop_assert!((after - before).abs() <= 1e-10 * st.area);
        }
    }
}
