//! The coupled time step and the run loop.
//!
//! Per step: advance the surface, carry the fields over with the Piola map,
//! solve the harmonic lift, then alternate Cahn–Hilliard and momentum solves
//! (Picard sweeps). Each momentum solve is followed by a projection onto
//! `ker B`, so V is discretely divergence-free to solver tolerance.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::cahn_hilliard::{step_cahn_hilliard_cached, NewtonOptions};
use super::config::{InitialData, SimConfig};
use super::stokes::{step_stokes_cached, StokesInputs, StokesParams};
use crate::diagnostics::{self, BalanceRow, DiagRow};
use crate::error::{Error, Result};
use crate::geometry::{
    advance_positions, compute_flow_frame, piola_push, FlowFrame, GeometryPreset, SurfaceState,
};
use crate::lift::{harmonic_lift, SolenoidalProjector};
use crate::linalg::{FactorCache, SolveOptions};
use crate::mesh::{make_icosphere, TriMesh, Vec3};
use crate::physics::{chemical_potential, PotentialKind};

/// Counters and flags raised during one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvents {
    /// Nodes with `|φ| ≥ 1` under the log potential (values are kept, not clamped).
    pub phi_out_of_range: usize,
    /// Nodes where ν(φ) was raised to ν_*.
    pub nu_clamped: usize,
    /// `max|φ| > 1 − δ₀` while separation monitoring is on.
    pub separation_flag: bool,
}

/// Everything known at the end of a step.
#[derive(Debug, Clone)]
pub struct StepState {
    pub step: usize,
    pub surface: SurfaceState,
    /// Divergence-free tangential velocity.
    pub v: Vec<Vec3>,
    /// Harmonic lift `∇_Γ Π`.
    pub u_hat: Vec<Vec3>,
    pub v_total: Vec<Vec3>,
    pub pi: Vec<f64>,
    /// Lift potential Π.
    pub lift_potential: Vec<f64>,
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub picard_iters: usize,
    /// Relative change of the last Picard sweep.
    pub picard_update: f64,
    pub newton_iters: usize,
    pub stokes_residual: f64,
    pub events: StepEvents,
}

impl StepState {
    pub fn t(&self) -> f64 {
        self.surface.t
    }
}

/// Where and why a run stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortRecord {
    /// The step that failed.
    pub step: usize,
    pub t: f64,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rows: Vec<DiagRow>,
    /// One row per completed step.
    pub balance: Vec<BalanceRow>,
    pub final_state: StepState,
    pub abort: Option<AbortRecord>,
    pub event_totals: StepEvents,
}

/// A validated configuration bound to its mesh.
pub struct Simulation {
    config: SimConfig,
    data: InitialData,
    preset: GeometryPreset,
    mesh: Arc<TriMesh>,
    solve: SolveOptions,
    stokes: StokesParams,
    newton: NewtonOptions,
    /// Last projector; its factor preconditions the next slice's.
    projector: Option<Arc<SolenoidalProjector>>,
    projector_stale: bool,
    stokes_cache: FactorCache,
    ch_cache: FactorCache,
}

/// GMRES iterations after which the projector factor is rebuilt.
const PROJECTOR_STALE_ITERS: usize = 6;

/// Lumped `L²` norm.
fn l2(m: &[f64], f: impl Iterator<Item = f64>) -> f64 {
    m.iter().zip(f).map(|(m, v)| m * v * v).sum::<f64>().sqrt()
}

fn relative_change(m: &[f64], new: &[f64], old: &[f64]) -> f64 {
    let d = l2(m, new.iter().zip(old).map(|(a, b)| a - b));
    d / l2(m, new.iter().copied()).max(1e-8)
}

fn relative_change_vec(m: &[f64], new: &[Vec3], old: &[Vec3]) -> f64 {
    let d = l2(m, new.iter().zip(old).map(|(a, b)| (a - b).norm()));
    d / l2(m, new.iter().map(|v| v.norm())).max(1e-8)
}

/// Carries V and φ from the previous slice to the next one: V by the Piola
/// push, φ by its nodal values (fixed connectivity makes the pullback the
/// identity on coefficients).
pub fn transport_step(prev: &StepState, frame: &FlowFrame) -> Result<(Vec<Vec3>, Vec<f64>)> {
    let v = piola_push(frame, &prev.surface, &prev.v)?;
    Ok((v, prev.phi.clone()))
}

impl Simulation {
    /// Validates `config`, builds the mesh and checks the initial phase field.
    pub fn new(config: SimConfig) -> Result<Self> {
        let data = config.validate()?;
        let preset = config.geometry.preset();
        let mesh = Arc::new(make_icosphere(
            config.geometry.subdivisions,
            config.geometry.radius,
        )?);
        if config.separation_monitored() {
            let bound = 1.0 - 2.0 * config.initial.delta0;
            let worst = mesh
                .vertices
                .iter()
                .map(|x| data.phi0.eval(x, 0.0).abs())
                .fold(0.0, f64::max);
            if !(worst <= bound) {
                return Err(Error::config(
                    "initial.phi0",
                    format!("max|φ₀| = {worst} exceeds 1 − 2δ₀ = {bound}"),
                ));
            }
        }
        let solve = config.numerics.solve_options();
        let stokes = StokesParams {
            penalty: config.numerics.penalty,
            stabilization: config.numerics.stabilization,
            solve: solve.clone(),
        };
        let newton = NewtonOptions {
            tol: config.numerics.newton_tol,
            max_iter: config.numerics.newton_max,
        };
        Ok(Simulation {
            config,
            data,
            preset,
            mesh,
            ch_cache: FactorCache::new(solve.clone().block(2)),
            stokes_cache: stokes.cache(),
            solve,
            stokes,
            newton,
            projector: None,
            projector_stale: false,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    /// Drops every cached factorization.
    fn reset_caches(&mut self) {
        self.projector = None;
        self.projector_stale = false;
        self.stokes_cache = self.stokes.cache();
        self.ch_cache = FactorCache::new(self.solve.clone().block(2));
    }

    fn projector(&mut self, surface: &SurfaceState) -> Result<Arc<SolenoidalProjector>> {
        let p = match &self.projector {
            Some(p) if self.preset.is_stationary() => return Ok(p.clone()),
            Some(p) if !self.projector_stale => p.reuse_for(surface)?,
            _ => SolenoidalProjector::new(surface)?,
        };
        self.projector_stale = false;
        let p = Arc::new(p);
        self.projector = Some(p.clone());
        Ok(p)
    }

    /// Projects with the current projector, rebuilding its factor when the
    /// reused one fails.
    fn project(&mut self, surface: &SurfaceState, field: &[Vec3]) -> Result<Vec<Vec3>> {
        let p = self.projector(surface)?;
        let (v, iters) = match p.project_counted(field) {
            Ok(r) => r,
            Err(_) => {
                let fresh = Arc::new(SolenoidalProjector::new(surface)?);
                self.projector = Some(fresh.clone());
                fresh.project_counted(field)?
            }
        };
        self.projector_stale = iters > PROJECTOR_STALE_ITERS;
        Ok(v)
    }

    /// Step 0: φ₀ and the projected V₀ on Γ₀, with the lift and μ₀.
    pub fn initial_state(&mut self) -> Result<StepState> {
        let surface = SurfaceState::compute(
            self.mesh.clone(),
            self.mesh.vertices.clone(),
            0.0,
            &self.preset,
        )?;
        let phi: Vec<f64> = surface
            .positions
            .iter()
            .map(|x| self.data.phi0.eval(x, 0.0))
            .collect();
        let raw: Vec<Vec3> = surface
            .positions
            .iter()
            .map(|x| {
                let [a, b, c] = &self.data.v0;
                Vec3::new(a.eval(x, 0.0), b.eval(x, 0.0), c.eval(x, 0.0))
            })
            .collect();
        if phi.iter().any(|p| !p.is_finite())
            || raw.iter().any(|v| !v.iter().all(|c| c.is_finite()))
        {
            return Err(Error::config(
                "initial",
                "initial data is not finite on the mesh",
            ));
        }
        let v = self.project(&surface, &raw)?;
        let lift = harmonic_lift(&surface, &self.solve)?;
        let mu = chemical_potential(&surface, &phi, &self.config.potential);
        let v_total = v.iter().zip(&lift.u_hat).map(|(a, b)| a + b).collect();
        let nv = surface.n_vertices();
        let events = self.events(&phi, 0);
        Ok(StepState {
            step: 0,
            surface,
            v,
            u_hat: lift.u_hat,
            v_total,
            pi: vec![0.0; nv],
            lift_potential: lift.pi,
            phi,
            mu,
            picard_iters: 0,
            picard_update: 0.0,
            newton_iters: 0,
            stokes_residual: 0.0,
            events,
        })
    }

    fn events(&self, phi: &[f64], nu_clamped: usize) -> StepEvents {
        let max_abs = phi.iter().fold(0.0f64, |a, p| a.max(p.abs()));
        let phi_out_of_range = if self.config.potential.kind == PotentialKind::RegularizedLog {
            phi.iter().filter(|p| p.abs() >= 1.0).count()
        } else {
            0
        };
        StepEvents {
            phi_out_of_range,
            nu_clamped,
            separation_flag: self.config.separation_monitored()
                && max_abs > 1.0 - self.config.initial.delta0,
        }
    }

    /// Advances `prev` by one time step.
    pub fn coupled_step(&mut self, prev: &StepState) -> Result<StepState> {
        let num = &self.config.numerics;
        let dt = num.dt;
        let step = prev.step + 1;
        let t = step as f64 * dt;
        let (surface, v_tilde, phi_tilde) = if self.preset.is_stationary() {
            let mut s = prev.surface.clone();
            s.t = t;
            (s, prev.v.clone(), prev.phi.clone())
        } else {
            let x = advance_positions(
                &prev.surface,
                &self.preset,
                dt,
                self.config.geometry.min_quality,
            )?;
            let s = SurfaceState::compute(self.mesh.clone(), x, t, &self.preset)?;
            let frame = compute_flow_frame(&prev.surface, &s)?;
            let (v, phi) = transport_step(prev, &frame)?;
            (s, v, phi)
        };
        let lift = harmonic_lift(&surface, &self.solve)?;
        // P Vⁿ = Piola push + the explicit Piola-rate term, i.e. the normal time derivative
        let v_prev = surface.project_tangent(&prev.v);
        let u_hat_prev = surface.project_tangent(&prev.u_hat);
        let num = self.config.numerics.clone();

        let m = surface.lumped_area.clone();
        let mut v = v_tilde;
        let mut phi = phi_tilde.clone();
        let mut mu = prev.mu.clone();
        let mut pi = prev.pi.clone();
        let mut update = f64::INFINITY;
        let mut last_update = f64::INFINITY;
        let mut iters = 0;
        let mut newton_iters = 0;
        let mut stokes_residual = 0.0;
        let mut nu_clamped = 0;
        while iters < num.picard_max {
            iters += 1;
            let v_total: Vec<Vec3> = v.iter().zip(&lift.u_hat).map(|(a, b)| a + b).collect();
            let ch = step_cahn_hilliard_cached(
                &surface,
                &v_total,
                &phi_tilde,
                &prev.surface.lumped_area,
                dt,
                &self.config.potential,
                &self.newton,
                &mut self.ch_cache,
            )?;
            let st = step_stokes_cached(
                &surface,
                &StokesInputs {
                    phi: &ch.phi,
                    mu: &ch.mu,
                    wind: &v,
                    v_prev: &v_prev,
                    u_hat: &lift.u_hat,
                    u_hat_prev: &u_hat_prev,
                    dt,
                },
                &self.config.material,
                &self.stokes,
                &mut self.stokes_cache,
            )?;
            let v_new = self.project(&surface, &st.v)?;
            update = relative_change(&m, &ch.phi, &phi).max(relative_change_vec(&m, &v_new, &v));
            if !update.is_finite() {
                return Err(Error::Solver {
                    method: "picard",
                    message: "non-finite iterate".into(),
                    history: vec![update],
                });
            }
            if iters > 1 && update > 1.0 && update > last_update {
                return Err(Error::Solver {
                    method: "picard",
                    message: format!("diverging sweeps at t = {t}"),
                    history: vec![last_update, update],
                });
            }
            last_update = update;
            phi = ch.phi;
            mu = ch.mu;
            pi = st.pi;
            v = v_new;
            newton_iters += ch.newton_iters;
            stokes_residual = st.residual;
            nu_clamped = st.nu_clamped;
            if update < num.picard_tol {
                break;
            }
        }
        if num.picard_require_convergence && update > 10.0 * num.picard_tol {
            return Err(Error::Solver {
                method: "picard",
                message: format!("update {update:e} after {iters} sweeps exceeds 10 × picard_tol"),
                history: vec![update],
            });
        }
        let events = self.events(&phi, nu_clamped);
        if events.separation_flag {
            log::warn!("step {step}: max|φ| exceeds 1 − δ₀");
        }
        if events.phi_out_of_range > 0 {
            log::warn!(
                "step {step}: {} nodes with |φ| ≥ 1",
                events.phi_out_of_range
            );
        }
        let v_total = v.iter().zip(&lift.u_hat).map(|(a, b)| a + b).collect();
        Ok(StepState {
            step,
            surface,
            v,
            u_hat: lift.u_hat,
            v_total,
            pi,
            lift_potential: lift.pi,
            phi,
            mu,
            picard_iters: iters,
            picard_update: update,
            newton_iters,
            stokes_residual,
            events,
        })
    }

    /// Diagnostics of one state.
    pub fn diagnostics(&self, s: &StepState, wall_time: f64) -> DiagRow {
        let e = diagnostics::energy(
            &s.surface,
            &s.v_total,
            &s.phi,
            &self.config.potential,
            &self.config.material,
        );
        let (div, constraint, tangency) = diagnostics::residuals(&s.surface, &s.v);
        let max_abs_phi = s.phi.iter().fold(0.0f64, |a, p| a.max(p.abs()));
        DiagRow {
            t: s.t(),
            mass: diagnostics::mass(&s.surface, &s.phi),
            area: s.surface.area,
            energy: e.total(),
            kinetic: e.kinetic,
            potential: e.potential,
            gradient: e.gradient,
            max_abs_phi,
            separation_margin: 1.0 - max_abs_phi,
            div_residual: div,
            constraint_residual: constraint,
            tangency_max: tangency,
            picard_iters: s.picard_iters,
            wall_time,
        }
    }

    /// Runs to `t_end`. `observer` sees every output state (step 0 and every
    /// `cadence` steps) with its row; an observer error aborts the run like a
    /// step error. Errors before the first step are returned directly.
    pub fn run(
        &mut self,
        mut observer: impl FnMut(&StepState, &DiagRow) -> Result<()>,
    ) -> Result<RunOutcome> {
        let start = Instant::now();
        self.reset_caches();
        let mut state = self.initial_state()?;
        let row = self.diagnostics(&state, start.elapsed().as_secs_f64());
        observer(&state, &row)?;
        let mut rows = vec![row];
        let mut balance = vec![];
        let mut totals = state.events;
        let mut energy = row.energy;
        let n = self.config.numerics.n_steps();
        let cadence = self.config.output.cadence;
        let dt = self.config.numerics.dt;
        let mut abort = None;
        for step in 1..=n {
            let next = match self.coupled_step(&state) {
                Ok(s) => s,
                Err(e) => {
                    let e = Error::Step {
                        step,
                        t: step as f64 * dt,
                        source: Box::new(e),
                    };
                    log::error!("{e}");
                    abort = Some(AbortRecord {
                        step,
                        t: step as f64 * dt,
                        kind: e.kind().to_string(),
                        message: e.to_string(),
                    });
                    break;
                }
            };
            let row = self.diagnostics(&next, start.elapsed().as_secs_f64());
            let diss = diagnostics::dissipation(
                &next.surface,
                &next.v_total,
                &next.phi,
                &next.mu,
                &self.config.material,
            );
            balance.push(BalanceRow {
                t: row.t,
                energy: row.energy,
                dissipation: diss,
                residual: (row.energy - energy) / dt + diss,
            });
            energy = row.energy;
            totals.phi_out_of_range += next.events.phi_out_of_range;
            totals.nu_clamped += next.events.nu_clamped;
            totals.separation_flag |= next.events.separation_flag;
            state = next;
            if step % cadence == 0 {
                if let Err(e) = observer(&state, &row) {
                    abort = Some(AbortRecord {
                        step,
                        t: row.t,
                        kind: e.kind().to_string(),
                        message: e.to_string(),
                    });
                    rows.push(row);
                    break;
                }
                rows.push(row);
            }
        }
        Ok(RunOutcome {
            rows,
            balance,
            final_state: state,
            abort,
            event_totals: totals,
        })
    }
}
