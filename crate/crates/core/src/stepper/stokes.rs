//! Momentum solve for the divergence-free velocity V and the resolvent problem.
//!
//! Unknowns are interleaved per vertex as `4i + {0,1,2}` (velocity) and `4i + 3`
//! (pressure). The saddle system is
//!
//! ```text
//! [  A   −Bᵀ ] [V]   [f]
//! [ −B   −τK ] [π] = [0]
//! ```
//!
//! with `B` the weak divergence, `τ K` a Brezzi–Pitkäranta pressure
//! stabilisation and a lumped normal penalty inside `A`.

use crate::error::{Error, Result};
use crate::fem::{
    advection, deformation, density_mass, divergence, face_gradient, face_vector_gradient,
    face_vector_load, flatten, mass, stiffness, tensor_load, unflatten, vector_block,
    weighted_block_mass, Coeff,
};
use crate::geometry::{Mat3, SurfaceState};
use crate::linalg::{ConstantMode, FactorCache, SolveOptions, SparseOperator, TripletBuilder};
use crate::mesh::Vec3;
use crate::physics::{density, flux_jrho, korteweg_rhs, viscosity, MaterialSpec};

#[derive(Debug, Clone)]
pub struct StokesParams {
    /// Normal penalty β.
    pub penalty: f64,
    /// Stabilisation γ; the pressure block is `τ = γ h² / (ν_max + s h²)` with
    /// `s` the zeroth-order coefficient (`ρ_max/dt` or ω).
    pub stabilization: f64,
    pub solve: SolveOptions,
}

impl Default for StokesParams {
    fn default() -> Self {
        StokesParams {
            penalty: 1e6,
            stabilization: 1.0,
            solve: SolveOptions::default(),
        }
    }
}

impl StokesParams {
    /// An empty factor cache for the saddle system.
    pub fn cache(&self) -> FactorCache {
        FactorCache::new(self.solve.clone().block(4))
    }
}

/// Fields entering one momentum solve, all on the same slice.
#[derive(Debug, Clone, Copy)]
pub struct StokesInputs<'a> {
    pub phi: &'a [f64],
    pub mu: &'a [f64],
    /// Lagged velocity in the advection wind (Picard iterate).
    pub wind: &'a [Vec3],
    /// Previous-step velocity, projected onto this slice's tangent planes.
    pub v_prev: &'a [Vec3],
    pub u_hat: &'a [Vec3],
    /// Previous-step lift, projected onto this slice's tangent planes.
    pub u_hat_prev: &'a [Vec3],
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct StokesOutcome {
    pub v: Vec<Vec3>,
    /// Pressure with zero lumped mean.
    pub pi: Vec<f64>,
    /// Relative residual of the saddle solve.
    pub residual: f64,
    /// Nodes where the viscosity was clamped at ν_*.
    pub nu_clamped: usize,
}

/// `[[A, −s Bᵀ], [−s B, −s² τK]]`, the system for the scaled pressure `π / s`.
fn saddle(
    a: &SparseOperator,
    b: &SparseOperator,
    k: &SparseOperator,
    tau: f64,
    s: f64,
) -> SparseOperator {
    let nv = k.nrows;
    let vel = |i: usize| 4 * (i / 3) + i % 3;
    let mut t = TripletBuilder::with_capacity(4 * nv, 4 * nv, a.nnz() + 2 * b.nnz() + k.nnz());
    t.push_operator(a, 1.0, vel, vel);
    t.push_operator(b, -s, |i| 4 * i + 3, vel);
    for i in 0..b.nrows {
        for (j, v) in b.row(i) {
            t.push(vel(j), 4 * i + 3, -s * v);
        }
    }
    t.push_operator(k, -tau * s * s, |i| 4 * i + 3, |j| 4 * j + 3);
    t.build(a.symmetric)
}

fn solve_saddle(
    state: &SurfaceState,
    a: &SparseOperator,
    rhs_v: &[f64],
    tau: f64,
    scale: f64,
    cache: &mut FactorCache,
) -> Result<(Vec<Vec3>, Vec<f64>, f64)> {
    let nv = state.n_vertices();
    let b = divergence(state);
    let k = stiffness(state, Coeff::Const(1.0));
    // pressure scaled by the viscosity so both blocks have comparable pivots
    let op = saddle(a, &b, &k, tau, scale);
    let mut rhs = vec![0.0; 4 * nv];
    for i in 0..nv {
        rhs[4 * i..4 * i + 3].copy_from_slice(&rhs_v[3 * i..3 * i + 3]);
    }
    let sol = cache.solve(&op, &rhs)?;
    let v = (0..nv)
        .map(|i| Vec3::new(sol.x[4 * i], sol.x[4 * i + 1], sol.x[4 * i + 2]))
        .collect();
    let mut pi: Vec<f64> = (0..nv).map(|i| scale * sol.x[4 * i + 3]).collect();
    ConstantMode::scalar(Some(state.lumped_area.clone())).remove_mean(&mut pi);
    Ok((v, pi, sol.residual))
}

fn check_len(state: &SurfaceState, n: usize, what: &str) -> Result<()> {
    if n != state.n_vertices() {
        return Err(Error::Contract(format!(
            "{what} has {n} nodes, mesh has {}",
            state.n_vertices()
        )));
    }
    Ok(())
}

/// Per-face `P_f ∇u` of a vertex vector field.
fn face_covariant_gradients(state: &SurfaceState, u: &[Vec3]) -> Vec<Mat3> {
    (0..state.faces.len())
        .map(|f| state.faces[f].projector() * face_vector_gradient(state, f, u))
        .collect()
}

/// One linearised momentum solve (Picard sweep).
pub fn step_stokes(
    state: &SurfaceState,
    inp: &StokesInputs,
    material: &MaterialSpec,
    params: &StokesParams,
) -> Result<StokesOutcome> {
    step_stokes_cached(state, inp, material, params, &mut params.cache())
}

/// [`step_stokes`] with the saddle system solved through `cache`.
pub fn step_stokes_cached(
    state: &SurfaceState,
    inp: &StokesInputs,
    material: &MaterialSpec,
    params: &StokesParams,
    cache: &mut FactorCache,
) -> Result<StokesOutcome> {
    let nv = state.n_vertices();
    for (n, what) in [
        (inp.phi.len(), "phi"),
        (inp.mu.len(), "mu"),
        (inp.wind.len(), "wind"),
        (inp.v_prev.len(), "v_prev"),
        (inp.u_hat.len(), "u_hat"),
        (inp.u_hat_prev.len(), "u_hat_prev"),
    ] {
        check_len(state, n, what)?;
    }
    if !(inp.dt > 0.0) {
        return Err(Error::Contract(format!("dt = {} must be positive", inp.dt)));
    }
    let dt = inp.dt;
    let rho = density(material, inp.phi);
    let (nu, nu_clamped) = viscosity(material, inp.phi);
    let j_rho = flux_jrho(state, inp.mu, material);
    let rho_vn: Vec<f64> = rho.iter().zip(&state.v_n).map(|(r, v)| r * v).collect();
    let moving = state.v_n.iter().any(|v| *v != 0.0);
    let lifted = inp.u_hat.iter().any(|u| *u != Vec3::zeros());

    let m_rho = vector_block(&density_mass(state, Coeff::Nodal(&rho))?);
    let a_def = deformation(state, Coeff::Nodal(&nu), material.nu_min, params.penalty)?;

    // wind ρV + J_ρ + ρû
    let wind: Vec<Vec3> = (0..nv)
        .map(|i| rho[i] * (inp.wind[i] + inp.u_hat[i]) + j_rho[i])
        .collect();
    let mut a = m_rho.lin_comb(1.0 / dt, &a_def, 1.0);
    a = a.lin_comb(
        1.0,
        &vector_block(&advection(state, &wind, Coeff::Const(1.0))),
        1.0,
    );
    if moving {
        a = a.lin_comb(
            1.0,
            &weighted_block_mass(state, Coeff::Nodal(&rho_vn), &state.weingarten),
            1.0,
        );
    }
    if lifted {
        let grad_u = face_covariant_gradients(state, inp.u_hat);
        a = a.lin_comb(
            1.0,
            &weighted_block_mass(state, Coeff::Nodal(&rho), &grad_u),
            1.0,
        );
    }

    let mut rhs = m_rho.matvec(&flatten(inp.v_prev));
    rhs.iter_mut().for_each(|r| *r /= dt);
    let add = |rhs: &mut Vec<f64>, v: Vec<f64>, s: f64| {
        for (r, x) in rhs.iter_mut().zip(v) {
            *r += s * x;
        }
    };
    add(&mut rhs, korteweg_rhs(state, inp.phi), 1.0);
    if moving {
        let vn_h = weighted_block_mass(state, Coeff::Nodal(&state.v_n), &state.weingarten);
        add(&mut rhs, vn_h.matvec(&flatten(&j_rho)), -1.0);
        let nu_vn: Vec<f64> = nu.iter().zip(&state.v_n).map(|(n, v)| n * v).collect();
        let lift_stress: Vec<Mat3> = state
            .mesh
            .faces
            .iter()
            .enumerate()
            .map(|(f, tri)| state.weingarten[f] * Coeff::Nodal(&nu_vn).face_mean(tri))
            .collect();
        add(&mut rhs, tensor_load(state, &lift_stress), -2.0);
        let vn2: Vec<f64> = state.v_n.iter().map(|v| v * v).collect();
        let g: Vec<Vec3> = (0..state.faces.len())
            .map(|f| face_gradient(state, f, &vn2))
            .collect();
        add(
            &mut rhs,
            face_vector_load(state, Coeff::Nodal(&rho), &g),
            0.5,
        );
    }
    if lifted {
        let du: Vec<Vec3> = inp
            .u_hat
            .iter()
            .zip(inp.u_hat_prev)
            .map(|(a, b)| a - b)
            .collect();
        add(&mut rhs, m_rho.matvec(&flatten(&du)), -1.0 / dt);
        let w: Vec<Vec3> = (0..nv).map(|i| rho[i] * inp.u_hat[i] + j_rho[i]).collect();
        let uh = flatten(inp.u_hat);
        add(
            &mut rhs,
            vector_block(&advection(state, &w, Coeff::Const(1.0))).matvec(&uh),
            -1.0,
        );
        if moving {
            let rvh = weighted_block_mass(state, Coeff::Nodal(&rho_vn), &state.weingarten);
            add(&mut rhs, rvh.matvec(&uh), -1.0);
        }
        add(&mut rhs, a_def.matvec(&uh), -1.0);
    }

    let h2 = state.h * state.h;
    let rho_max = rho.iter().copied().fold(0.0, f64::max);
    let tau = params.stabilization * h2 / (material.nu_max_bound() + rho_max * h2 / dt);
    let (v, pi, residual) = solve_saddle(state, &a, &rhs, tau, material.nu_max_bound(), cache)?;
    Ok(StokesOutcome {
        v,
        pi,
        residual,
        nu_clamped,
    })
}

/// Solves `ω(u, η) + 2(ν(φ) E_S(u), E_S(η)) − (π, div η) = (f, η)` with
/// `div u = 0` (stabilised) and returns `u`.
pub fn stokes_resolvent(
    state: &SurfaceState,
    phi: &[f64],
    f: &[Vec3],
    omega: f64,
    material: &MaterialSpec,
    params: &StokesParams,
) -> Result<Vec<Vec3>> {
    if !(omega > 0.0) {
        return Err(Error::Contract(format!(
            "resolvent shift ω = {omega} must be positive"
        )));
    }
    check_len(state, phi.len(), "phi")?;
    check_len(state, f.len(), "f")?;
    let (nu, _) = viscosity(material, phi);
    let m = vector_block(&mass(state, Coeff::Const(1.0)));
    let a = m.lin_comb(
        omega,
        &deformation(state, Coeff::Nodal(&nu), material.nu_min, params.penalty)?,
        1.0,
    );
    let rhs = m.matvec(&flatten(f));
    let h2 = state.h * state.h;
    let tau = params.stabilization * h2 / (material.nu_max_bound() + omega * h2);
    let (u, _, _) = solve_saddle(
        state,
        &a,
        &rhs,
        tau,
        material.nu_max_bound(),
        &mut params.cache(),
    )?;
    Ok(u)
}

/// Lumped `L²` norm of a vertex vector field.
pub fn vector_l2(state: &SurfaceState, v: &[Vec3]) -> f64 {
    v.iter()
        .zip(&state.lumped_area)
        .map(|(v, m)| m * v.norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Discrete `H²` proxy `‖u‖ + ‖∇u‖ + ‖Δ_h u‖` (componentwise, lumped norms),
/// with `Δ_h = M_L⁻¹ K`.
pub fn h2_proxy(state: &SurfaceState, u: &[Vec3]) -> f64 {
    let k = stiffness(state, Coeff::Const(1.0));
    let flat = flatten(u);
    let kb = vector_block(&k);
    let grad2 = kb.bilinear(&flat, &flat);
    let lap = unflatten(&kb.matvec(&flat));
    let lap2: f64 = lap
        .iter()
        .zip(&state.lumped_area)
        .map(|(l, m)| l.norm_squared() / m)
        .sum();
    vector_l2(state, u) + grad2.sqrt() + lap2.sqrt()
}
