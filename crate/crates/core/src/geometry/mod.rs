//! Evolving-surface geometry: curvature data, the normal flow and the Piola frame.

pub mod flow;
pub mod frame;
pub mod harmonics;
pub mod preset;
pub mod state;

pub use flow::{advance_positions, evolve, normal_flow_velocity, MIN_RADIUS_RATIO};
pub use frame::{
    compute_flow_frame, piola_pull, piola_push, FaceFrame, FlowFrame, VertexPiola, TANGENCY_TOL,
};
pub use harmonics::real_harmonic;
pub use preset::{GeometryPreset, HarmonicMode};
pub use state::{tangent_basis, BaseGeometry, FaceGeom, Mat3, SurfaceState};
