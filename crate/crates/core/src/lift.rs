//! Harmonic lift `û = ∇_Γ Π` with `−Δ_Γ Π = H v_n`, the discrete Leray
//! projection on a slice, and the pulled-back gradient.

use crate::error::{Error, Result};
use crate::fem::{
    divergence, face_gradient, flatten, recover_gradient, stiffness, unflatten, weak_gradient,
    Coeff,
};
use crate::geometry::{FlowFrame, SurfaceState, TANGENCY_TOL};
use std::sync::Arc;

use crate::linalg::iterative::gmres_preconditioned;
use crate::linalg::{
    ConstantMode, DirectSolver, LinearSolver, SolveOptions, SparseOperator, TripletBuilder,
};
use crate::mesh::Vec3;

/// Relative `∫ H v_n` above which the lift problem is rejected.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LiftResult {
    /// Potential with zero mean.
    pub pi: Vec<f64>,
    /// Recovered tangential gradient of `pi`.
    pub u_hat: Vec<Vec3>,
    /// Relative residual of the stiffness solve.
    pub residual: f64,
}

/// Solves `∫ ∇Π·∇η = ∫ H v_n η` (mixed-area quadrature on the right, so the
/// data sums to the discrete constraint) and recovers `û`.
pub fn harmonic_lift(state: &SurfaceState, opts: &SolveOptions) -> Result<LiftResult> {
    let nv = state.n_vertices();
    let c = state.constraint_residual();
    if c > COMPATIBILITY_TOL {
        return Err(Error::Physics(format!(
            "lift data incompatible: relative ∫H v_n = {c:e}"
        )));
    }
    if state.v_n.iter().all(|v| *v == 0.0) {
        return Ok(LiftResult {
            pi: vec![0.0; nv],
            u_hat: vec![Vec3::zeros(); nv],
            residual: 0.0,
        });
    }
    let rhs: Vec<f64> = (0..nv)
        .map(|i| state.mixed_area[i] * state.mean_curv[i] * state.v_n[i])
        .collect();
    let k = stiffness(state, Coeff::Const(1.0));
    let opts = SolveOptions {
        nullspace: Some(ConstantMode::scalar(Some(state.lumped_area.clone()))),
        block: 1,
        ..opts.clone()
    };
    let sol = LinearSolver::new(k, opts)?.solve(&rhs)?;
    let u_hat = recover_gradient(state, &sol.x);
    Ok(LiftResult {
        pi: sol.x,
        u_hat,
        residual: sol.residual,
    })
}

#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub div_free: Vec<Vec3>,
    /// Zero-mean potential with `field = div_free + Ĝ potential`.
    pub potential: Vec<f64>,
}

/// Discrete Leray projection on one slice.
///
/// With the weak gradient `G`, lumped areas `M_L` and vertex projectors `P`,
/// the recovered gradient is `Ĝ = P M_L⁻¹ G` and the weak divergence is
/// `D = Gᵀ P`, so `D v = 0` means `Σ_i m_i v_i·(Ĝq)_i = 0` for all P1 `q`.
/// `p` solves `D Ĝ p = D f` and the divergence-free part is `f − Ĝp`, which
/// is exactly idempotent and `M_L`-orthogonal to all recovered gradients.
pub struct HelmholtzProjector {
    grad: SparseOperator,
    div: SparseOperator,
    solver: LinearSolver,
    lumped: Vec<f64>,
    normals: Vec<Vec3>,
}

impl HelmholtzProjector {
    pub fn new(state: &SurfaceState, opts: &SolveOptions) -> Result<Self> {
        let g = weak_gradient(state);
        let nv = state.n_vertices();
        // P as a block-diagonal operator
        let mut pt = TripletBuilder::with_capacity(3 * nv, 3 * nv, 9 * nv);
        let mut pm = TripletBuilder::with_capacity(3 * nv, 3 * nv, 9 * nv);
        for i in 0..nv {
            let p = &state.projectors[i];
            for k in 0..3 {
                for l in 0..3 {
                    pt.push(3 * i + k, 3 * i + l, p[(k, l)]);
                    pm.push(3 * i + k, 3 * i + l, p[(k, l)] / state.lumped_area[i]);
                }
            }
        }
        let p = pt.build(true);
        let p_minv = pm.build(true);
        let grad = p_minv.matmul(&g);
        let div = g.transpose().matmul(&p);
        let mut lap = div.matmul(&grad);
        lap.symmetric = true;
        let solver = LinearSolver::new(
            lap,
            SolveOptions {
                nullspace: Some(ConstantMode::scalar(Some(state.lumped_area.clone()))),
                block: 1,
                ..opts.clone()
            },
        )?;
        Ok(HelmholtzProjector {
            grad,
            div,
            solver,
            lumped: state.lumped_area.clone(),
            normals: state.normals.clone(),
        })
    }

    /// Weak divergence `D v` (one entry per vertex).
    pub fn weak_divergence(&self, v: &[Vec3]) -> Vec<f64> {
        self.div.matvec(&flatten(v))
    }

    /// `‖D v‖_{M_L⁻¹} / ‖v‖_{M_L}`, a dimensionless divergence defect (0 for `v = 0`).
    pub fn divergence_residual(&self, v: &[Vec3]) -> f64 {
        relative_defect(&self.weak_divergence(v), v, &self.lumped)
    }

    pub fn gradient(&self, p: &[f64]) -> Vec<Vec3> {
        unflatten(&self.grad.matvec(p))
    }

    /// Projects the tangential part of `field`.
    pub fn project(&self, field: &[Vec3]) -> Result<ProjectionResult> {
        let tangential: Vec<Vec3> = field
            .iter()
            .zip(&self.normals)
            .map(|(f, n)| f - n * n.dot(f))
            .collect();
        let rhs = self.div.matvec(&flatten(&tangential));
        let potential = self.solver.solve(&rhs)?.x;
        let g = self.gradient(&potential);
        let div_free = tangential.iter().zip(&g).map(|(f, g)| f - g).collect();
        Ok(ProjectionResult {
            div_free,
            potential,
        })
    }
}

/// One-shot projection of a tangential field on `state`.
pub fn helmholtz_project(
    state: &SurfaceState,
    field: &[Vec3],
    opts: &SolveOptions,
) -> Result<ProjectionResult> {
    let defect = state.tangency_defect(field);
    if defect > TANGENCY_TOL {
        return Err(Error::Contract(format!(
            "projection input not tangential: relative |f·n| = {defect:e}"
        )));
    }
    HelmholtzProjector::new(state, opts)?.project(field)
}

const SHIFT: f64 = 1e-10;
/// Preconditioned relative residual of the projection solve.
const PROJECT_TOL: f64 = 1e-13;
const PROJECT_MAX_ITERS: usize = 40;
/// Accepted residual when GMRES stalls before `PROJECT_TOL`.
const PROJECT_STALL: f64 = 1e-10;

/// Projection onto tangent fields with zero elementwise divergence.
///
/// `B` is the P1 divergence (`(Bv)_i = Σ_f |f|/3 ∇·v|_f`), the operator the
/// saddle-point solve constrains. With `S = P M_L⁻¹` the projection is
/// `v ↦ Pv − S Bᵀ q`, `B S Bᵀ q = B P v`, so `B` of the output vanishes up to
/// the solver tolerance and fields already in `ker B` (rigid rotations) are
/// returned unchanged. On coarse meshes `B S Bᵀ` can be singular; its kernel
/// is also the kernel of `S Bᵀ`, so any solution gives the same projection.
///
/// The system is solved by GMRES preconditioned with a factor of the slightly
/// shifted operator, possibly taken from an earlier slice.
pub struct SolenoidalProjector {
    div: SparseOperator,
    lift: SparseOperator,
    lap: SparseOperator,
    factor: Arc<DirectSolver>,
    lumped: Vec<f64>,
    normals: Vec<Vec3>,
}

/// `(B, S Bᵀ, B S Bᵀ)` on a slice.
fn projection_operators(state: &SurfaceState) -> (SparseOperator, SparseOperator, SparseOperator) {
    let nv = state.n_vertices();
    let b = divergence(state);
    let mut pm = TripletBuilder::with_capacity(3 * nv, 3 * nv, 9 * nv);
    for i in 0..nv {
        let p = &state.projectors[i];
        for k in 0..3 {
            for l in 0..3 {
                pm.push(3 * i + k, 3 * i + l, p[(k, l)] / state.lumped_area[i]);
            }
        }
    }
    let lift = pm.build(true).matmul(&b.transpose());
    let mut lap = b.matmul(&lift);
    lap.symmetric = true;
    (b, lift, lap)
}

impl SolenoidalProjector {
    pub fn new(state: &SurfaceState) -> Result<Self> {
        let (div, lift, lap) = projection_operators(state);
        let d = lap.diagonal();
        let shift = SHIFT * d.iter().sum::<f64>() / d.len() as f64;
        let shifted = lap.lin_comb(
            1.0,
            &SparseOperator::diagonal_matrix(&vec![shift; lap.nrows]),
            1.0,
        );
        let factor = Arc::new(DirectSolver::factor(&shifted, 1)?);
        Ok(SolenoidalProjector {
            div,
            lift,
            lap,
            factor,
            lumped: state.lumped_area.clone(),
            normals: state.normals.clone(),
        })
    }

    /// The projector of `state`, preconditioned with the factor of `self`.
    /// Meant for a nearby slice of the same mesh.
    pub fn reuse_for(&self, state: &SurfaceState) -> Result<Self> {
        if state.n_vertices() != self.lumped.len() {
            return Err(Error::Contract("projector reused on another mesh".into()));
        }
        let (div, lift, lap) = projection_operators(state);
        Ok(SolenoidalProjector {
            div,
            lift,
            lap,
            factor: self.factor.clone(),
            lumped: state.lumped_area.clone(),
            normals: state.normals.clone(),
        })
    }

    /// `B v` (one entry per vertex).
    pub fn divergence(&self, v: &[Vec3]) -> Vec<f64> {
        self.div.matvec(&flatten(v))
    }

    /// `‖B v‖_{M_L⁻¹} / ‖v‖_{M_L}` (0 for `v = 0`).
    pub fn divergence_residual(&self, v: &[Vec3]) -> f64 {
        relative_defect(&self.divergence(v), v, &self.lumped)
    }

    /// Returns the projected tangential part of `field`.
    pub fn project(&self, field: &[Vec3]) -> Result<Vec<Vec3>> {
        self.project_counted(field).map(|(v, _)| v)
    }

    /// [`project`](Self::project) plus the number of GMRES iterations used.
    pub fn project_counted(&self, field: &[Vec3]) -> Result<(Vec<Vec3>, usize)> {
        let tangential: Vec<Vec3> = field
            .iter()
            .zip(&self.normals)
            .map(|(f, n)| f - n * n.dot(f))
            .collect();
        let rhs = self.div.matvec(&flatten(&tangential));
        if rhs.iter().all(|r| *r == 0.0) {
            return Ok((tangential, 0));
        }
        let o = gmres_preconditioned(
            &self.lap,
            &rhs,
            |r| self.factor.solve(&r),
            None,
            PROJECT_TOL,
            PROJECT_MAX_ITERS,
            PROJECT_MAX_ITERS,
        )?;
        // on singular coarse meshes the residual stalls at round-off level
        if !o.converged && !o.history.last().is_some_and(|&r| r < PROJECT_STALL) {
            return Err(Error::Solver {
                method: "solenoidal projection",
                message: "preconditioned GMRES did not converge".into(),
                history: o.history,
            });
        }
        let corr = unflatten(&self.lift.matvec(&o.x));
        Ok((
            tangential.iter().zip(&corr).map(|(f, c)| f - c).collect(),
            o.iterations,
        ))
    }
}

/// `‖d‖_{M_L⁻¹} / ‖v‖_{M_L}`.
pub(crate) fn relative_defect(d: &[f64], v: &[Vec3], lumped: &[f64]) -> f64 {
    let num: f64 = d.iter().zip(lumped).map(|(d, m)| d * d / m).sum();
    let den: f64 = v
        .iter()
        .zip(lumped)
        .map(|(v, m)| m * v.norm_squared())
        .sum();
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Pulled-back gradient `A⁻¹ D⁻ᵀ ∇_{Γ₀} p` of a function on Γ₀: applied per
/// face to the constant Γ₀ gradient, then Γ₀-area averaged and projected at vertices.
pub fn pullback_gradient(frame: &FlowFrame, state0: &SurfaceState, p0: &[f64]) -> Vec<Vec3> {
    let nv = state0.n_vertices();
    let mut acc = vec![Vec3::zeros(); nv];
    let mut w = vec![0.0; nv];
    for (f, tri) in state0.mesh.faces.iter().enumerate() {
        let ff = &frame.faces[f];
        let g = ff.a_inv * (ff.d_minus.transpose() * face_gradient(state0, f, p0));
        let a = state0.faces[f].area;
        for &v in tri {
            acc[v] += g * a;
            w[v] += a;
        }
    }
    (0..nv)
        .map(|i| state0.projectors[i] * acc[i] / w[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mass;
    use crate::geometry::{compute_flow_frame, real_harmonic};
    use crate::mesh::make_icosphere;
    use std::sync::Arc;

    fn sphere_with(s: u32, vn: impl Fn(&Vec3) -> f64) -> SurfaceState {
        let mesh = Arc::new(make_icosphere(s, 1.0).unwrap());
        let v: Vec<f64> = mesh.vertices.iter().map(vn).collect();
        SurfaceState::with_normal_velocity(mesh.clone(), mesh.vertices.clone(), 0.0, v).unwrap()
    }

    fn l2_rel(st: &SurfaceState, a: &[f64], b: &[f64]) -> f64 {
        let m = mass(st, Coeff::Const(1.0));
        let e: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        (m.bilinear(&e, &e) / m.bilinear(b, b)).sqrt()
    }

    fn vec_l2(st: &SurfaceState, v: &[Vec3]) -> f64 {
        v.iter()
            .zip(&st.lumped_area)
            .map(|(v, m)| m * v.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn zero_velocity_gives_zero_lift() {
        let st = sphere_with(2, |_| 0.0);
        let l = harmonic_lift(&st, &SolveOptions::default()).unwrap();
        assert!(l.pi.iter().all(|v| *v == 0.0));
        assert!(l.u_hat.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn lift_of_first_harmonic_converges() {
        let mut errs = vec![];
        for s in [2, 3, 4] {
            let st = sphere_with(s, |x| x.z / 2.0);
            let l = harmonic_lift(&st, &SolveOptions::default()).unwrap();
            let mean: f64 = l.pi.iter().zip(&st.lumped_area).map(|(p, m)| p * m).sum();
            assert!(mean.abs() < 1e-12);
            let exact: Vec<f64> = st.positions.iter().map(|x| x.z / 2.0).collect();
            errs.push(l2_rel(&st, &l.pi, &exact));
            let uh: Vec<Vec3> = st
                .positions
                .iter()
                .map(|x| (Vec3::z() - x * x.z) / 2.0)
                .collect();
            let e: Vec<Vec3> = l.u_hat.iter().zip(&uh).map(|(a, b)| a - b).collect();
            assert!(vec_l2(&st, &e) / vec_l2(&st, &uh) < 0.05);
        }
        assert!(errs[1] / errs[2] > 3.0, "{errs:?}");
    }

    #[test]
    fn lift_of_second_harmonic() {
        // H v_n = 2 Y20  ⇒  Π = Y20 / 3
        let st = sphere_with(4, |x| real_harmonic(2, 0, x));
        let l = harmonic_lift(&st, &SolveOptions::default()).unwrap();
        let exact: Vec<f64> = st
            .positions
            .iter()
            .map(|x| real_harmonic(2, 0, x) / 3.0)
            .collect();
        assert!(l2_rel(&st, &l.pi, &exact) < 1e-2);
    }

    #[test]
    fn incompatible_data_is_rejected() {
        let st = sphere_with(2, |_| 1.0);
        assert!(matches!(
            harmonic_lift(&st, &SolveOptions::default()),
            Err(Error::Physics(_))
        ));
    }

    #[test]
    fn lift_is_unchanged_by_reprojection() {
        let st = sphere_with(3, |x| x.z * x.z);
        let vn = st.enforce_inextensibility(&st.v_n).unwrap();
        let st1 = SurfaceState::with_normal_velocity(
            st.mesh.clone(),
            st.positions.clone(),
            0.0,
            vn.clone(),
        )
        .unwrap();
        let vn2 = st1.enforce_inextensibility(&vn).unwrap();
        let st2 =
            SurfaceState::with_normal_velocity(st.mesh.clone(), st.positions.clone(), 0.0, vn2)
                .unwrap();
        let a = harmonic_lift(&st1, &SolveOptions::default()).unwrap();
        let b = harmonic_lift(&st2, &SolveOptions::default()).unwrap();
        for (p, q) in a.pi.iter().zip(&b.pi) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_properties() {
        let st = sphere_with(4, |_| 0.0);
        let hp = HelmholtzProjector::new(&st, &SolveOptions::default()).unwrap();
        let rot: Vec<Vec3> = st.positions.iter().map(|x| Vec3::z().cross(x)).collect();
        let grad: Vec<Vec3> = st.positions.iter().map(|x| Vec3::z() - x * x.z).collect();
        let field: Vec<Vec3> = rot.iter().zip(&grad).map(|(a, b)| a + b).collect();

        let pr = hp.project(&field).unwrap();
        assert!(hp.divergence_residual(&pr.div_free) < 1e-10);
        let again = hp.project(&pr.div_free).unwrap();
        let diff: Vec<Vec3> = again
            .div_free
            .iter()
            .zip(&pr.div_free)
            .map(|(a, b)| a - b)
            .collect();
        assert!(vec_l2(&st, &diff) < 1e-10 * vec_l2(&st, &field));
        let recon: Vec<Vec3> = pr
            .div_free
            .iter()
            .zip(hp.gradient(&pr.potential))
            .zip(&field)
            .map(|((d, g), f)| d + g - f)
            .collect();
        assert!(vec_l2(&st, &recon) < 1e-12 * vec_l2(&st, &field));
        // the rotation part survives, the gradient part is removed, both up to O(h)
        let e: Vec<Vec3> = pr.div_free.iter().zip(&rot).map(|(a, b)| a - b).collect();
        assert!(vec_l2(&st, &e) / vec_l2(&st, &rot) < 0.05);
        let g = hp.project(&grad).unwrap();
        assert!(vec_l2(&st, &g.div_free) / vec_l2(&st, &grad) < 0.05);
    }

    #[test]
    fn solenoidal_projection_properties() {
        for s in [1, 2, 3] {
            let st = sphere_with(s, |_| 0.0);
            let sp = SolenoidalProjector::new(&st).unwrap();
            let rot: Vec<Vec3> = st.positions.iter().map(|x| Vec3::z().cross(x)).collect();
            assert!(sp.divergence_residual(&rot) < 1e-14);
            let same = sp.project(&rot).unwrap();
            let mx = same
                .iter()
                .zip(&rot)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(mx < 1e-13, "{mx:e}");
            let field: Vec<Vec3> = st
                .positions
                .iter()
                .map(|x| Vec3::new(x.y * x.z, 0.3 + x.x, x.x * x.x - x.y))
                .collect();
            let once = sp.project(&field).unwrap();
            assert!(
                sp.divergence_residual(&once) < 1e-9,
                "{:e}",
                sp.divergence_residual(&once)
            );
            assert!(st.tangency_defect(&once) < 1e-14);
            let twice = sp.project(&once).unwrap();
            let d: Vec<Vec3> = once.iter().zip(&twice).map(|(a, b)| a - b).collect();
            assert!(vec_l2(&st, &d) < 1e-9 * vec_l2(&st, &once));
            // orthogonal projection in the lumped inner product: no growth
            let pf = st.project_tangent(&field);
            assert!(vec_l2(&st, &once) <= vec_l2(&st, &pf) * (1.0 + 1e-12));
            // gradients are removed up to O(h)
            let grad: Vec<Vec3> = st.positions.iter().map(|x| Vec3::z() - x * x.z).collect();
            let g = sp.project(&grad).unwrap();
            if s == 3 {
                assert!(
                    vec_l2(&st, &g) / vec_l2(&st, &grad) < 0.1,
                    "{}",
                    vec_l2(&st, &g) / vec_l2(&st, &grad)
                );
            }
        }
    }

    #[test]
    fn projection_rejects_normal_fields() {
        let st = sphere_with(1, |_| 0.0);
        assert!(matches!(
            helmholtz_project(&st, &st.normals.clone(), &SolveOptions::default()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn pullback_gradient_identity_and_radial() {
        let mesh = Arc::new(make_icosphere(3, 1.0).unwrap());
        let st0 = SurfaceState::at_rest(mesh.clone(), mesh.vertices.clone(), 0.0).unwrap();
        let p: Vec<f64> = st0.positions.iter().map(|x| x.x * x.z + x.y).collect();
        let plain = recover_gradient(&st0, &p);
        let id = compute_flow_frame(&st0, &st0).unwrap();
        for (a, b) in pullback_gradient(&id, &st0, &p).iter().zip(&plain) {
            assert!((a - b).norm() < 1e-12);
        }
        // J D⁻ D⁻ᵀ = P₀ for a dilation: the pulled-back gradient is the Γ₀ gradient
        let big = SurfaceState::at_rest(
            mesh.clone(),
            mesh.vertices.iter().map(|x| x * 1.7).collect(),
            0.0,
        )
        .unwrap();
        let fr = compute_flow_frame(&st0, &big).unwrap();
        for (a, b) in pullback_gradient(&fr, &st0, &p).iter().zip(&plain) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn projecting_a_pulled_back_gradient_leaves_little() {
        let mesh = Arc::new(make_icosphere(4, 1.0).unwrap());
        let st0 = SurfaceState::at_rest(mesh.clone(), mesh.vertices.clone(), 0.0).unwrap();
        let big = SurfaceState::at_rest(
            mesh.clone(),
            mesh.vertices.iter().map(|x| x * 1.5).collect(),
            0.0,
        )
        .unwrap();
        let fr = compute_flow_frame(&st0, &big).unwrap();
        let p: Vec<f64> = st0.positions.iter().map(|x| x.z * x.z + x.x).collect();
        let g = pullback_gradient(&fr, &st0, &p);
        let pr = helmholtz_project(&st0, &g, &SolveOptions::default()).unwrap();
        assert!(vec_l2(&st0, &pr.div_free) / vec_l2(&st0, &g) < 0.05);
    }
}
