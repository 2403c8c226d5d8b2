//! Resolved simulation configuration with defaults and validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{GeometryPreset, HarmonicMode, MIN_RADIUS_RATIO};
use crate::linalg::{SolveMethod, SolveOptions};
use crate::physics::{MaterialSpec, PotentialKind, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetKind {
    StationarySphere,
    OscillatingHarmonicSphere,
    CustomNormalField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub preset: PresetKind,
    /// Icosphere refinement level.
    pub subdivisions: u32,
    pub radius: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub l: u32,
    pub m: i32,
    /// Terms of the custom normal field.
    pub modes: Vec<HarmonicMode>,
    /// Smallest admissible triangle radius ratio.
    pub min_quality: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            preset: PresetKind::StationarySphere,
            subdivisions: 3,
            radius: 1.0,
            amplitude: 0.05,
            frequency: 2.0 * std::f64::consts::PI,
            l: 2,
            m: 0,
            modes: vec![],
            min_quality: MIN_RADIUS_RATIO,
        }
    }
}

impl GeometryConfig {
    pub fn preset(&self) -> GeometryPreset {
        match self.preset {
            PresetKind::StationarySphere => GeometryPreset::StationarySphere {
                radius: self.radius,
            },
            PresetKind::OscillatingHarmonicSphere => GeometryPreset::OscillatingHarmonicSphere {
                radius: self.radius,
                amplitude: self.amplitude,
                frequency: self.frequency,
                l: self.l,
                m: self.m,
            },
            PresetKind::CustomNormalField => GeometryPreset::CustomNormalField {
                radius: self.radius,
                modes: self.modes.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Resolvent shift ω, used by the resolvent solve only.
    pub omega: f64,
    pub picard_max: usize,
    pub picard_tol: f64,
    /// Abort when the Picard loop ends above `10 · picard_tol`.
    pub picard_require_convergence: bool,
    /// Normal-component penalty β.
    pub penalty: f64,
    /// Pressure stabilisation γ.
    pub stabilization: f64,
    pub solver: SolveMethod,
    pub solver_tol: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            dt: 1e-3,
            t_end: 0.1,
            omega: 1.0,
            picard_max: 2,
            picard_tol: 1e-8,
            picard_require_convergence: false,
            penalty: 1e6,
            stabilization: 1.0,
            solver: SolveMethod::Auto,
            solver_tol: 1e-10,
            newton_tol: 1e-12,
            newton_max: 50,
        }
    }
}

impl NumericsConfig {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            method: self.solver,
            tol: self.solver_tol,
            ..SolveOptions::default()
        }
    }

    /// Number of steps to reach `t_end` (rounded to the nearest multiple of `dt`).
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Write a diagnostics row (and snapshot) every `cadence` steps.
    pub cadence: usize,
    pub vtk: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            cadence: 10,
            vtk: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    /// φ₀ as an expression in `x, y, z, r`.
    pub phi0: String,
    /// Components of V₀; projected to a discretely divergence-free tangent field.
    pub v0: [String; 3],
    /// Separation margin δ₀.
    pub delta0: f64,
    /// Require `max|φ₀| ≤ 1 − 2δ₀` and flag steps with `max|φ| > 1 − δ₀`.
    pub monitor_separation: bool,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            phi0: "0".into(),
            v0: ["0".into(), "0".into(), "0".into()],
            delta0: 0.05,
            monitor_separation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub geometry: GeometryConfig,
    pub material: MaterialSpec,
    pub potential: PotentialSpec,
    pub numerics: NumericsConfig,
    pub output: OutputConfig,
    pub initial: InitialConfig,
}

/// Parsed initial-data expressions.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub phi0: Expr,
    pub v0: [Expr; 3],
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            key,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            key,
            format!("must be non-negative and finite, got {v}"),
        ))
    }
}

impl SimConfig {
    /// Semantic checks; returns the parsed initial data.
    pub fn validate(&self) -> Result<InitialData> {
        let g = &self.geometry;
        if g.subdivisions > 7 {
            return Err(Error::config(
                "geometry.subdivisions",
                "at most 7 supported",
            ));
        }
        positive("geometry.radius", g.radius)?;
        if !(g.min_quality > 0.0 && g.min_quality < 1.0) {
            return Err(Error::config("geometry.min_quality", "must lie in (0, 1)"));
        }
        if g.preset == PresetKind::OscillatingHarmonicSphere {
            if g.l as i32 <= 0 || g.m.unsigned_abs() > g.l {
                return Err(Error::config("geometry.l", "need l ≥ 1 and |m| ≤ l"));
            }
            if !g.amplitude.is_finite() || !g.frequency.is_finite() {
                return Err(Error::config("geometry.amplitude", "must be finite"));
            }
        }
        if g.preset == PresetKind::CustomNormalField {
            for (k, md) in g.modes.iter().enumerate() {
                if md.l == 0 || md.m.unsigned_abs() > md.l {
                    return Err(Error::config(
                        format!("geometry.modes[{k}]"),
                        "need l ≥ 1 (l = 0 violates inextensibility) and |m| ≤ l",
                    ));
                }
            }
        }

        let m = &self.material;
        positive("material.rho1", m.rho1)?;
        positive("material.rho2", m.rho2)?;
        positive("material.nu_min", m.nu_min)?;
        positive("material.nu1", m.nu1)?;
        positive("material.nu2", m.nu2)?;
        positive("material.nu_width", m.nu_width)?;

        let p = &self.potential;
        positive("potential.theta", p.theta)?;
        non_negative("potential.theta_c", p.theta_c)?;
        if !(p.delta_reg > 0.0 && p.delta_reg < 0.5) {
            return Err(Error::config("potential.delta_reg", "must lie in (0, 0.5)"));
        }
        if p.extension_order != 2 && p.extension_order != 4 {
            return Err(Error::config("potential.extension_order", "must be 2 or 4"));
        }

        let n = &self.numerics;
        positive("numerics.dt", n.dt)?;
        non_negative("numerics.t_end", n.t_end)?;
        non_negative("numerics.omega", n.omega)?;
        if n.picard_max == 0 {
            return Err(Error::config("numerics.picard_max", "must be at least 1"));
        }
        positive("numerics.picard_tol", n.picard_tol)?;
        positive("numerics.penalty", n.penalty)?;
        non_negative("numerics.stabilization", n.stabilization)?;
        positive("numerics.solver_tol", n.solver_tol)?;
        positive("numerics.newton_tol", n.newton_tol)?;
        if n.newton_max == 0 {
            return Err(Error::config("numerics.newton_max", "must be at least 1"));
        }
        if self.output.cadence == 0 {
            return Err(Error::config("output.cadence", "must be at least 1"));
        }

        let i = &self.initial;
        if !(i.delta0 > 0.0 && i.delta0 < 0.5) {
            return Err(Error::config("initial.delta0", "must lie in (0, 0.5)"));
        }
        let parse =
            |key: &str, src: &str| Expr::parse(src).map_err(|e| Error::config(key, e.to_string()));
        let data = InitialData {
            phi0: parse("initial.phi0", &i.phi0)?,
            v0: [
                parse("initial.v0[0]", &i.v0[0])?,
                parse("initial.v0[1]", &i.v0[1])?,
                parse("initial.v0[2]", &i.v0[2])?,
            ],
        };
        Ok(data)
    }

    /// Whether the separation bound applies (log potential with monitoring on).
    pub fn separation_monitored(&self) -> bool {
        self.initial.monitor_separation && self.potential.kind == PotentialKind::RegularizedLog
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = SimConfig::default();
        c.validate().unwrap();
        assert_eq!(c.numerics.n_steps(), 100);
    }

    #[test]
    fn bad_values_name_their_key() {
        let cases: Vec<(Box<dyn Fn(&mut SimConfig)>, &str)> = vec![
            (Box::new(|c| c.numerics.dt = -1.0), "numerics.dt"),
            (Box::new(|c| c.material.rho1 = 0.0), "material.rho1"),
            (Box::new(|c| c.initial.phi0 = "sin(".into()), "initial.phi0"),
            (Box::new(|c| c.output.cadence = 0), "output.cadence"),
            (
                Box::new(|c| c.potential.extension_order = 3),
                "potential.extension_order",
            ),
        ];
        for (mutate, key) in cases {
            let mut c = SimConfig::default();
            mutate(&mut c);
            match c.validate() {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key),
                other => panic!("{key}: {other:?}"),
            }
        }
    }
}
