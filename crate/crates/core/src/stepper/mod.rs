//! Time integration of the coupled system on a prescribed evolving surface.

pub mod cahn_hilliard;
pub mod config;
pub mod coupled;
pub mod stokes;

pub use cahn_hilliard::{
    ch_energy, step_cahn_hilliard, step_cahn_hilliard_cached, ChOutcome, NewtonOptions,
};
pub use config::{
    GeometryConfig, InitialConfig, InitialData, NumericsConfig, OutputConfig, PresetKind, SimConfig,
};
pub use coupled::{transport_step, AbortRecord, RunOutcome, Simulation, StepEvents, StepState};
pub use stokes::{
    h2_proxy, step_stokes, step_stokes_cached, stokes_resolvent, vector_l2, StokesInputs,
    StokesOutcome, StokesParams,
};
