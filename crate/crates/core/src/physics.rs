//! Constitutive laws: double-well potential, density, viscosity, chemical
//! potential, the relative mass flux and the capillary (Korteweg) load.

use serde::{Deserialize, Serialize};

use crate::fem::{face_gradient, recover_gradient, stiffness, tensor_load, Coeff};
use crate::geometry::{Mat3, SurfaceState};
use crate::mesh::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    /// Flory–Huggins logarithmic potential with a Taylor extension near ±1.
    RegularizedLog,
    /// `¼(s² − 1)²`.
    Quartic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    /// Absolute temperature θ.
    pub theta: f64,
    /// Critical temperature θ_c; phases separate for θ < θ_c.
    pub theta_c: f64,
    /// The logarithm is used on `[−1 + δ, 1 − δ]`.
    pub delta_reg: f64,
    /// Degree of the Taylor extension outside the window: 4 (C⁴) or 2 (C²).
    pub extension_order: u32,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec {
            kind: PotentialKind::RegularizedLog,
            theta: 1.0,
            theta_c: 2.0,
            delta_reg: 1e-4,
            extension_order: 4,
        }
    }
}

impl PotentialSpec {
    pub fn quartic() -> Self {
        PotentialSpec {
            kind: PotentialKind::Quartic,
            ..Self::default()
        }
    }

    /// Derivative `k ∈ 0..=5` of the logarithmic (convex) part inside the window.
    fn log_part(&self, k: u32, s: f64) -> f64 {
        let th = self.theta;
        let q = 1.0 - s * s;
        match k {
            0 => 0.5 * th * ((1.0 + s) * (1.0 + s).ln() + (1.0 - s) * (1.0 - s).ln()),
            1 => 0.5 * th * ((1.0 + s) / (1.0 - s)).ln(),
            2 => th / q,
            3 => 2.0 * th * s / (q * q),
            4 => 2.0 * th * (1.0 + 3.0 * s * s) / (q * q * q),
            5 => 24.0 * th * s * (1.0 + s * s) / (q * q * q * q),
            _ => unreachable!(),
        }
    }

    /// Derivative `k` of the convex part `Ψ_convex`.
    pub fn convex(&self, k: u32, s: f64) -> f64 {
        match self.kind {
            PotentialKind::Quartic => match k {
                0 => 0.25 * s.powi(4) + 0.25,
                1 => s.powi(3),
                2 => 3.0 * s * s,
                3 => 6.0 * s,
                4 => 6.0,
                _ => 0.0,
            },
            PotentialKind::RegularizedLog => {
                let edge = 1.0 - self.delta_reg;
                if s.abs() <= edge {
                    return if k <= 5 {
                        self.log_part(k, s)
                    } else {
                        f64::NAN
                    };
                }
                let s0 = edge.copysign(s);
                let x = s - s0;
                let order = self.extension_order.min(4);
                // Taylor polynomial of degree `order` about s0, differentiated k times
                let mut acc = 0.0;
                let mut fact = 1.0;
                for j in k..=order {
                    if j > k {
                        fact *= (j - k) as f64;
                    }
                    acc += self.log_part(j, s0) * x.powi((j - k) as i32) / fact;
                }
                acc
            }
        }
    }

    /// Derivative `k` of the concave part `−(θ_c/2)s²` (`−½s²` for the quartic).
    pub fn concave(&self, k: u32, s: f64) -> f64 {
        let c = match self.kind {
            PotentialKind::Quartic => 1.0,
            PotentialKind::RegularizedLog => self.theta_c,
        };
        match k {
            0 => -0.5 * c * s * s,
            1 => -c * s,
            2 => -c,
            _ => 0.0,
        }
    }

    pub fn psi(&self, s: f64) -> f64 {
        self.convex(0, s) + self.concave(0, s)
    }

    pub fn psi_d1(&self, s: f64) -> f64 {
        self.convex(1, s) + self.concave(1, s)
    }

    pub fn psi_d2(&self, s: f64) -> f64 {
        self.convex(2, s) + self.concave(2, s)
    }

    pub fn psi_d3(&self, s: f64) -> f64 {
        self.convex(3, s) + self.concave(3, s)
    }

    /// Whether `s` lies where the potential is unbounded in the unregularised model.
    pub fn outside_physical_range(&self, s: f64) -> bool {
        self.kind == PotentialKind::RegularizedLog && s.abs() >= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViscosityProfile {
    /// `ν ≡ nu1`.
    Constant,
    /// Affine in φ with `ν(−1) = nu1`, `ν(1) = nu2`.
    Affine,
    /// `nu1 + (nu2 − nu1)(1 + tanh(φ/nu_width))/2`.
    SmoothInterp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialSpec {
    /// Density of the phase φ = −1.
    pub rho1: f64,
    /// Density of the phase φ = +1.
    pub rho2: f64,
    pub nu_profile: ViscosityProfile,
    pub nu1: f64,
    pub nu2: f64,
    pub nu_width: f64,
    /// Lower viscosity bound ν_*.
    pub nu_min: f64,
}

impl Default for MaterialSpec {
    fn default() -> Self {
        MaterialSpec {
            rho1: 1.0,
            rho2: 1.0,
            nu_profile: ViscosityProfile::Constant,
            nu1: 1.0,
            nu2: 1.0,
            nu_width: 0.1,
            nu_min: 1e-3,
        }
    }
}

impl MaterialSpec {
    pub fn constant_viscosity(nu: f64) -> Self {
        MaterialSpec {
            nu1: nu,
            nu2: nu,
            ..Self::default()
        }
    }

    pub fn rho(&self, s: f64) -> f64 {
        0.5 * (self.rho1 + self.rho2) + 0.5 * (self.rho2 - self.rho1) * s
    }

    /// Unclamped viscosity profile.
    pub fn nu_raw(&self, s: f64) -> f64 {
        let (nu1, nu2) = (self.nu1, self.nu2);
        match self.nu_profile {
            ViscosityProfile::Constant => nu1,
            ViscosityProfile::Affine => 0.5 * (nu1 + nu2) + 0.5 * (nu2 - nu1) * s,
            ViscosityProfile::SmoothInterp => {
                nu1 + (nu2 - nu1) * 0.5 * (1.0 + (s / self.nu_width).tanh())
            }
        }
    }

    /// Upper bound of the clamped viscosity over φ ∈ [−1, 1].
    pub fn nu_max_bound(&self) -> f64 {
        match self.nu_profile {
            ViscosityProfile::Constant => self.nu1,
            _ => self.nu1.max(self.nu2),
        }
        .max(self.nu_min)
    }

    /// `(ρ̃₁ − ρ̃₂)/2`, the prefactor of the relative flux.
    pub fn flux_factor(&self) -> f64 {
        0.5 * (self.rho1 - self.rho2)
    }
}

/// Nodal density `ρ(φ)`.
pub fn density(spec: &MaterialSpec, phi: &[f64]) -> Vec<f64> {
    phi.iter().map(|&s| spec.rho(s)).collect()
}

/// Nodal viscosity clamped at ν_*, with the number of clamped nodes.
pub fn viscosity(spec: &MaterialSpec, phi: &[f64]) -> (Vec<f64>, usize) {
    let mut clamped = 0;
    let nu = phi
        .iter()
        .map(|&s| {
            let v = spec.nu_raw(s);
            if v < spec.nu_min {
                clamped += 1;
                spec.nu_min
            } else {
                v
            }
        })
        .collect();
    (nu, clamped)
}

/// `μ = M_L⁻¹ K φ + Ψ'(φ)`.
pub fn chemical_potential(state: &SurfaceState, phi: &[f64], spec: &PotentialSpec) -> Vec<f64> {
    let kphi = stiffness(state, Coeff::Const(1.0)).matvec(phi);
    kphi.iter()
        .zip(&state.lumped_area)
        .zip(phi)
        .map(|((k, m), &s)| k / m + spec.psi_d1(s))
        .collect()
}

/// `J_ρ = −((ρ̃₁ − ρ̃₂)/2) ∇_Γ μ` with the recovered gradient.
pub fn flux_jrho(state: &SurfaceState, mu: &[f64], spec: &MaterialSpec) -> Vec<Vec3> {
    let c = spec.flux_factor();
    if c == 0.0 {
        return vec![Vec3::zeros(); mu.len()];
    }
    recover_gradient(state, mu)
        .into_iter()
        .map(|g| -c * g)
        .collect()
}

/// Weak Korteweg load `∫ (∇_Γφ ⊗ ∇_Γφ) : ∇_Γ η` (interleaved vector dofs).
pub fn korteweg_rhs(state: &SurfaceState, phi: &[f64]) -> Vec<f64> {
    let tensors: Vec<Mat3> = (0..state.faces.len())
        .map(|f| {
            let g = face_gradient(state, f, phi);
            g * g.transpose()
        })
        .collect();
    tensor_load(state, &tensors)
}
