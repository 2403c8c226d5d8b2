//! Prescribed normal-velocity families.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::harmonics::real_harmonic;
use crate::mesh::Vec3;

/// One term `amplitude · cos(frequency · t + phase) · Y_lm` of a custom normal field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicMode {
    pub l: u32,
    pub m: i32,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// Prescribed evolution of the surface, all starting from a sphere of radius `radius`.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryPreset {
    StationarySphere {
        radius: f64,
    },
    /// Raw normal velocity `ε R ω cos(ω t) Y_lm`, i.e. a radius perturbation
    /// `ε R sin(ω t) Y_lm` before the inextensibility correction.
    OscillatingHarmonicSphere {
        radius: f64,
        amplitude: f64,
        frequency: f64,
        l: u32,
        m: i32,
    },
    CustomNormalField {
        radius: f64,
        modes: Vec<HarmonicMode>,
    },
}

impl GeometryPreset {
    /// The oscillating preset used throughout the tests: `R = 1`, `ε = 0.05`,
    /// one oscillation per unit time, `Y_20`.
    pub fn oscillating_default() -> Self {
        GeometryPreset::OscillatingHarmonicSphere {
            radius: 1.0,
            amplitude: 0.05,
            frequency: 2.0 * PI,
            l: 2,
            m: 0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GeometryPreset::StationarySphere { .. } => "stationary_sphere",
            GeometryPreset::OscillatingHarmonicSphere { .. } => "oscillating_harmonic_sphere",
            GeometryPreset::CustomNormalField { .. } => "custom_normal_field",
        }
    }

    pub fn radius(&self) -> f64 {
        match *self {
            GeometryPreset::StationarySphere { radius }
            | GeometryPreset::OscillatingHarmonicSphere { radius, .. }
            | GeometryPreset::CustomNormalField { radius, .. } => radius,
        }
    }

    /// True when the raw normal velocity vanishes identically.
    pub fn is_stationary(&self) -> bool {
        match self {
            GeometryPreset::StationarySphere { .. } => true,
            GeometryPreset::OscillatingHarmonicSphere {
                amplitude,
                frequency,
                ..
            } => *amplitude == 0.0 || *frequency == 0.0,
            GeometryPreset::CustomNormalField { modes, .. } => {
                modes.iter().all(|m| m.amplitude == 0.0)
            }
        }
    }

    /// Raw (uncorrected) normal velocity at point `x`, time `t`.
    pub fn raw_normal_velocity(&self, x: &Vec3, t: f64) -> f64 {
        match self {
            GeometryPreset::StationarySphere { .. } => 0.0,
            GeometryPreset::OscillatingHarmonicSphere {
                radius,
                amplitude,
                frequency,
                l,
                m,
            } => {
                if *amplitude == 0.0 {
                    return 0.0;
                }
                amplitude * radius * frequency * (frequency * t).cos() * real_harmonic(*l, *m, x)
            }
            GeometryPreset::CustomNormalField { modes, .. } => modes
                .iter()
                .map(|md| {
                    md.amplitude
                        * (md.frequency * t + md.phase).cos()
                        * real_harmonic(md.l, md.m, x)
                })
                .sum(),
        }
    }

    /// One-line human description for the `presets` listing.
    pub fn describe(&self) -> String {
        match self {
            GeometryPreset::StationarySphere { radius } => {
                format!("stationary_sphere: radius = {radius}; v_n = 0")
            }
            GeometryPreset::OscillatingHarmonicSphere {
                radius,
                amplitude,
                frequency,
                l,
                m,
            } => format!(
                "oscillating_harmonic_sphere: radius = {radius}, amplitude = {amplitude}, \
                 frequency = {frequency}, l = {l}, m = {m}; v_n = amplitude*radius*frequency*cos(frequency*t)*Y_lm"
            ),
            GeometryPreset::CustomNormalField { radius, modes } => format!(
                "custom_normal_field: radius = {radius}, {} mode(s) [l, m, amplitude, frequency, phase]; \
                 v_n = sum amplitude*cos(frequency*t+phase)*Y_lm",
                modes.len()
            ),
        }
    }
}
