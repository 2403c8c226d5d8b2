//! Per-step scalar functionals: mass, area, energy parts and residuals.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fem::{deformation, divergence, flatten, mass as mass_matrix, stiffness, Coeff};
use crate::linalg::{dot, DirectSolver};
use crate::geometry::SurfaceState;
use crate::mesh::Vec3;
use crate::physics::{density, viscosity, MaterialSpec, PotentialSpec};

/// CSV column order of [`DiagRow`].
pub const DIAG_HEADER: [&str; 14] = [
    "t",
    "mass",
    "area",
    "energy",
    "kinetic",
    "potential",
    "gradient",
    "max_abs_phi",
    "separation_margin",
    "div_residual",
    "constraint_residual",
    "tangency_max",
    "picard_iters",
    "wall_time",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagRow {
    pub t: f64,
    /// `∫ φ dσ`.
    pub mass: f64,
    pub area: f64,
    pub energy: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub gradient: f64,
    pub max_abs_phi: f64,
    pub separation_margin: f64,
    /// Divergence defect of V, see [`divergence_residual`].
    pub div_residual: f64,
    /// Relative `∫ H v_n dσ`.
    pub constraint_residual: f64,
    /// `max |V·n|`.
    pub tangency_max: f64,
    pub picard_iters: usize,
    /// Seconds since the start of the run.
    pub wall_time: f64,
}

impl DiagRow {
    /// Values in [`DIAG_HEADER`] order (`picard_iters` as a float).
    pub fn values(&self) -> [f64; 14] {
        [
            self.t,
            self.mass,
            self.area,
            self.energy,
            self.kinetic,
            self.potential,
            self.gradient,
            self.max_abs_phi,
            self.separation_margin,
            self.div_residual,
            self.constraint_residual,
            self.tangency_max,
            self.picard_iters as f64,
            self.wall_time,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub potential: f64,
    pub gradient: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential + self.gradient
    }
}

/// Lumped-quadrature energy: `Σ mᵢ ρᵢ/2 |vᵢ + v_n,i nᵢ|²`, `Σ mᵢ Ψ(φᵢ)`, `½ φᵀKφ`.
pub fn energy(
    state: &SurfaceState,
    v_total: &[Vec3],
    phi: &[f64],
    potential: &PotentialSpec,
    material: &MaterialSpec,
) -> EnergyParts {
    let rho = density(material, phi);
    let mut kinetic = 0.0;
    let mut pot = 0.0;
    for i in 0..state.n_vertices() {
        let u = v_total[i] + state.normals[i] * state.v_n[i];
        kinetic += 0.5 * state.lumped_area[i] * rho[i] * u.norm_squared();
        pot += state.lumped_area[i] * potential.psi(phi[i]);
    }
    let gradient = 0.5 * stiffness(state, Coeff::Const(1.0)).bilinear(phi, phi);
    EnergyParts {
        kinetic,
        potential: pot,
        gradient,
    }
}

/// `∫ φ dσ` (exact for P1).
pub fn mass(state: &SurfaceState, phi: &[f64]) -> f64 {
    phi.iter().zip(&state.lumped_area).map(|(p, m)| p * m).sum()
}

/// `‖B v‖_{M_L⁻¹} / ‖v‖_{M_L}` with the elementwise divergence `B`; 0 for `v = 0`.
pub fn divergence_residual(state: &SurfaceState, v: &[Vec3]) -> f64 {
    let d = divergence(state).matvec(&flatten(v));
    crate::lift::relative_defect(&d, v, &state.lumped_area)
}

/// Divergence defect in the norm of a weak residual: `‖B v‖_{(K+M)⁻¹} / ‖v‖_{M_L}`,
/// the `H⁻¹` dual norm of the tested divergence; 0 for `v = 0`.
pub fn divergence_dual_residual(state: &SurfaceState, v: &[Vec3]) -> Result<f64> {
    let r = divergence(state).matvec(&flatten(v));
    let vn = v
        .iter()
        .zip(&state.lumped_area)
        .map(|(v, m)| m * v.norm_squared())
        .sum::<f64>()
        .sqrt();
    if vn == 0.0 {
        return Ok(0.0);
    }
    let h1 = stiffness(state, Coeff::Const(1.0)).lin_comb(1.0, &mass_matrix(state, Coeff::Const(1.0)), 1.0);
    let y = DirectSolver::factor(&h1, 1)?.solve(&r);
    Ok(dot(&r, &y).max(0.0).sqrt() / vn)
}

/// `(div_residual, constraint_residual, tangency_max)` for a velocity on a slice.
pub fn residuals(state: &SurfaceState, v: &[Vec3]) -> (f64, f64, f64) {
    let tangency = v
        .iter()
        .zip(&state.normals)
        .map(|(v, n)| v.dot(n).abs())
        .fold(0.0, f64::max);
    (
        divergence_residual(state, v),
        state.constraint_residual(),
        tangency,
    )
}

/// Discrete dissipation `2∫ν|E_S(v)|² + ∫|∇μ|²` (no penalty).
pub fn dissipation(
    state: &SurfaceState,
    v_total: &[Vec3],
    phi: &[f64],
    mu: &[f64],
    material: &MaterialSpec,
) -> f64 {
    let (nu, _) = viscosity(material, phi);
    let flat = flatten(v_total);
    let visc = deformation(state, Coeff::Nodal(&nu), material.nu_min, 0.0)
        .map(|a| a.bilinear(&flat, &flat))
        .unwrap_or(f64::NAN);
    visc + stiffness(state, Coeff::Const(1.0)).bilinear(mu, mu)
}

/// One row of the energy-balance monitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    /// `(Eⁿ⁺¹ − Eⁿ)/dt + Dⁿ⁺¹`; zero for an exactly dissipative continuous model.
    pub residual: f64,
}

pub const BALANCE_HEADER: [&str; 4] = ["t", "energy", "dissipation", "residual"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_icosphere;
    use std::sync::Arc;

    fn sphere(s: u32) -> SurfaceState {
        let mesh = Arc::new(make_icosphere(s, 1.0).unwrap());
        SurfaceState::at_rest(mesh.clone(), mesh.vertices.clone(), 0.0).unwrap()
    }

    #[test]
    fn energy_examples() {
        let st = sphere(3);
        let nv = st.n_vertices();
        let z = vec![Vec3::zeros(); nv];
        let log = PotentialSpec::default();
        let mat = MaterialSpec::default();
        assert_eq!(energy(&st, &z, &vec![0.0; nv], &log, &mat).total(), 0.0);
        let c = 0.4;
        let e = energy(&st, &z, &vec![c; nv], &log, &mat);
        assert!((e.total() - st.area * log.psi(c)).abs() < 1e-12);
        assert!(e.gradient.abs() < 1e-14);
    }

    #[test]
    fn rotation_kinetic_energy_converges() {
        let exact = 0.5 * 8.0 * std::f64::consts::PI / 3.0;
        let mut errs = vec![];
        for s in [3, 4, 5] {
            let st = sphere(s);
            let r: Vec<Vec3> = st.positions.iter().map(|x| Vec3::z().cross(x)).collect();
            let nv = st.n_vertices();
            let e = energy(
                &st,
                &r,
                &vec![0.0; nv],
                &PotentialSpec::default(),
                &MaterialSpec::default(),
            );
            errs.push((e.kinetic - exact).abs() / exact);
        }
        assert!(errs[1] < 5e-3, "{errs:?}");
        assert!(
            errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0,
            "{errs:?}"
        );
    }

    #[test]
    fn residual_examples() {
        let st = sphere(3);
        let nv = st.n_vertices();
        let (d, c, t) = residuals(&st, &vec![Vec3::zeros(); nv]);
        assert_eq!((d, c, t), (0.0, 0.0, 0.0));
        let r: Vec<Vec3> = st.positions.iter().map(|x| Vec3::z().cross(x)).collect();
        let d = divergence_residual(&st, &r);
        assert!(d < 1e-14, "{d:e}");
        assert!(divergence_dual_residual(&st, &r).unwrap() < 1e-14);
        let zero = vec![Vec3::zeros(); nv];
        assert_eq!(divergence_dual_residual(&st, &zero).unwrap(), 0.0);
        // a gradient has a nonzero defect in both norms
        let g: Vec<Vec3> = st.positions.iter().map(|x| Vec3::z() - x * x.z).collect();
        assert!(divergence_dual_residual(&st, &g).unwrap() > 0.1);
    }
}
