//! Assembly of the P1 bilinear forms. Vector unknowns are interleaved per
//! vertex (`3i + k`); face gradients are constant and tangent to the face.

use super::Coeff;
use crate::error::{Error, Result};
use crate::geometry::{Mat3, SurfaceState};
use crate::linalg::{SparseOperator, TripletBuilder};
use crate::mesh::{TriMesh, Vec3};

/// Accumulates `R × C` blocks per vertex pair straight into the CSR pattern
/// of the vertex adjacency (one-ring plus the vertex itself). Row `R i + k`
/// holds, for each neighbour `j` in ascending order, columns `C j + l`.
struct BlockAssembler<const R: usize, const C: usize> {
    /// Start of vertex `i`'s neighbour list in `nbr`.
    vstart: Vec<usize>,
    nbr: Vec<usize>,
    values: Vec<f64>,
}

impl<const R: usize, const C: usize> BlockAssembler<R, C> {
    fn new(mesh: &TriMesh) -> Self {
        let nv = mesh.vertices.len();
        let mut vstart = Vec::with_capacity(nv + 1);
        let mut nbr = Vec::with_capacity(nv + mesh.edges.len() * 2);
        vstart.push(0);
        for (i, ring) in mesh.vertex_neighbors.iter().enumerate() {
            let at = ring.partition_point(|&j| j < i);
            nbr.extend_from_slice(&ring[..at]);
            nbr.push(i);
            nbr.extend_from_slice(&ring[at..]);
            vstart.push(nbr.len());
        }
        let values = vec![0.0; R * C * nbr.len()];
        BlockAssembler {
            vstart,
            nbr,
            values,
        }
    }

    /// Offset of entry `(R i + 0, C j + 0)`; row `k` adds `k C deg(i)`.
    #[inline]
    fn base(&self, i: usize, j: usize) -> usize {
        let (s, e) = (self.vstart[i], self.vstart[i + 1]);
        let p = s + self.nbr[s..e]
            .binary_search(&j)
            .expect("vertex pair outside the one-ring pattern");
        R * C * s + C * (p - s)
    }

    #[inline]
    fn add(&mut self, i: usize, j: usize, block: impl Fn(usize, usize) -> f64) {
        let base = self.base(i, j);
        let deg = self.vstart[i + 1] - self.vstart[i];
        for k in 0..R {
            for l in 0..C {
                self.values[base + k * C * deg + l] += block(k, l);
            }
        }
    }

    /// Adds the 3×3 vertex-pair blocks of every face, in face order.
    fn faces(
        mut self,
        mesh: &TriMesh,
        per_face: impl Fn(usize, usize, usize, usize, usize) -> f64,
    ) -> Self {
        for (f, tri) in mesh.faces.iter().enumerate() {
            for a in 0..3 {
                for b in 0..3 {
                    self.add(tri[a], tri[b], |k, l| per_face(f, a, b, k, l));
                }
            }
        }
        self
    }

    fn finish(self, symmetric: bool) -> SparseOperator {
        let nv = self.vstart.len() - 1;
        let mut indptr = Vec::with_capacity(R * nv + 1);
        let mut indices = Vec::with_capacity(self.values.len());
        indptr.push(0);
        for i in 0..nv {
            let ring = &self.nbr[self.vstart[i]..self.vstart[i + 1]];
            for _ in 0..R {
                for &j in ring {
                    indices.extend((0..C).map(|l| C * j + l));
                }
                indptr.push(indices.len());
            }
        }
        SparseOperator {
            nrows: R * nv,
            ncols: C * nv,
            indptr,
            indices,
            values: self.values,
            symmetric,
        }
    }
}

/// `∫_f w ψ_a ψ_b` for P1 `w`, exact.
#[inline]
pub(crate) fn local_mass(area: f64, w: [f64; 3]) -> [[f64; 3]; 3] {
    let s = w[0] + w[1] + w[2];
    let mut m = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            m[a][b] = if a == b {
                area / 60.0 * (4.0 * w[a] + 2.0 * s)
            } else {
                area / 60.0 * (w[a] + w[b] + s)
            };
        }
    }
    m
}

fn face_weights(c: &Coeff, tri: &[usize; 3]) -> [f64; 3] {
    [c.at(tri[0]), c.at(tri[1]), c.at(tri[2])]
}

/// Scalar mass matrix `∫ w ψ_i ψ_j`.
pub fn mass(state: &SurfaceState, w: Coeff) -> SparseOperator {
    let mesh = &state.mesh;
    let local: Vec<[[f64; 3]; 3]> = mesh
        .faces
        .iter()
        .zip(&state.faces)
        .map(|(tri, fg)| local_mass(fg.area, face_weights(&w, tri)))
        .collect();
    BlockAssembler::<1, 1>::new(mesh)
        .faces(mesh, |f, a, b, _, _| local[f][a][b])
        .finish(true)
}

/// Mass matrix with a density weight, which must be positive.
pub fn density_mass(state: &SurfaceState, rho: Coeff) -> Result<SparseOperator> {
    let min = rho.min();
    if !(min > 0.0) {
        return Err(Error::Physics(format!(
            "density weight {min} is not positive"
        )));
    }
    Ok(mass(state, rho))
}

/// Row-sum lumped mass `∫ w ψ_i`.
pub fn lumped_mass(state: &SurfaceState, w: Coeff) -> Vec<f64> {
    let mut d = vec![0.0; state.n_vertices()];
    for (tri, fg) in state.mesh.faces.iter().zip(&state.faces) {
        let m = local_mass(fg.area, face_weights(&w, tri));
        for a in 0..3 {
            d[tri[a]] += m[a][0] + m[a][1] + m[a][2];
        }
    }
    d
}

/// `op ⊗ I₃` in the interleaved vector layout.
pub fn vector_block(op: &SparseOperator) -> SparseOperator {
    let mut indptr = Vec::with_capacity(3 * op.nrows + 1);
    let mut indices = Vec::with_capacity(3 * op.nnz());
    let mut values = Vec::with_capacity(3 * op.nnz());
    indptr.push(0);
    for i in 0..op.nrows {
        for k in 0..3 {
            for (j, v) in op.row(i) {
                indices.push(3 * j + k);
                values.push(v);
            }
            indptr.push(indices.len());
        }
    }
    SparseOperator {
        nrows: 3 * op.nrows,
        ncols: 3 * op.ncols,
        indptr,
        indices,
        values,
        symmetric: op.symmetric,
    }
}

/// Stiffness `∫ w ∇_Γψ_i · ∇_Γψ_j` (cotangent formula when `w ≡ 1`).
pub fn stiffness(state: &SurfaceState, w: Coeff) -> SparseOperator {
    let mesh = &state.mesh;
    let scale: Vec<f64> = mesh
        .faces
        .iter()
        .zip(&state.faces)
        .map(|(tri, fg)| w.face_mean(tri) * fg.area)
        .collect();
    BlockAssembler::<1, 1>::new(mesh)
        .faces(mesh, |f, a, b, _, _| {
            let g = &state.faces[f].grads;
            scale[f] * g[a].dot(&g[b])
        })
        .finish(true)
}

/// Deformation form `2∫ ν E_S(ψ_i):E_S(ψ_j)` with the lumped normal penalty
/// `β Σ m_i (u_i·n_i)(w_i·n_i)`.
///
/// With `∇_Γ(ψ_a e_k) = e_k g_aᵀ` and the face projector `P`, the local block is
/// `ν A [P_kl (g_a·g_b) + g_b,k g_a,l]`.
pub fn deformation(
    state: &SurfaceState,
    nu: Coeff,
    nu_min: f64,
    beta: f64,
) -> Result<SparseOperator> {
    let lowest = nu.min();
    if lowest < nu_min || !(lowest > 0.0) {
        return Err(Error::Physics(format!(
            "viscosity {lowest} below the lower bound {nu_min}"
        )));
    }
    let mesh = &state.mesh;
    let mut asm = BlockAssembler::<3, 3>::new(mesh);
    for (tri, fg) in mesh.faces.iter().zip(&state.faces) {
        let p = fg.projector();
        let s = nu.face_mean(tri) * fg.area;
        for a in 0..3 {
            for b in 0..3 {
                let (ga, gb) = (&fg.grads[a], &fg.grads[b]);
                let gg = ga.dot(gb);
                asm.add(tri[a], tri[b], |k, l| s * (p[(k, l)] * gg + gb[k] * ga[l]));
            }
        }
    }
    if beta != 0.0 {
        for (i, n) in state.normals.iter().enumerate() {
            let s = beta * state.lumped_area[i];
            asm.add(i, i, |k, l| s * n[k] * n[l]);
        }
    }
    Ok(asm.finish(true))
}

/// Weak divergence `B_{i,(j,k)} = ∫ ψ_i div_Γ(ψ_j e_k)`.
pub fn divergence(state: &SurfaceState) -> SparseOperator {
    let mesh = &state.mesh;
    BlockAssembler::<1, 3>::new(mesh)
        .faces(mesh, |f, _, b, _, k| {
            let fg = &state.faces[f];
            fg.area / 3.0 * fg.grads[b][k]
        })
        .finish(false)
}

/// Weak gradient `G_{(i,k),j} = ∫ ψ_i ∂_k ψ_j` (tangential gradient of the trial function).
pub fn weak_gradient(state: &SurfaceState) -> SparseOperator {
    let mesh = &state.mesh;
    BlockAssembler::<3, 1>::new(mesh)
        .faces(mesh, |f, _, b, k, _| {
            let fg = &state.faces[f];
            fg.area / 3.0 * fg.grads[b][k]
        })
        .finish(false)
}

/// Recovered vertex gradient `P_i M_L⁻¹ G` as an operator (3nv × nv):
/// area-weighted face-gradient averaging followed by the vertex projection.
pub fn gradient_recovery(state: &SurfaceState) -> SparseOperator {
    let g = weak_gradient(state);
    let mut t = TripletBuilder::with_capacity(g.nrows, g.ncols, 3 * g.nnz());
    for i in 0..state.n_vertices() {
        let p = state.projectors[i] / state.lumped_area[i];
        for k in 0..3 {
            for l in 0..3 {
                let s = p[(k, l)];
                if s != 0.0 {
                    for (j, v) in g.row(3 * i + l) {
                        t.push(3 * i + k, j, s * v);
                    }
                }
            }
        }
    }
    t.build(false)
}

/// Recovered tangential vertex gradient of a P1 function.
pub fn recover_gradient(state: &SurfaceState, f: &[f64]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); state.n_vertices()];
    for (fi, tri) in state.mesh.faces.iter().enumerate() {
        let g = face_gradient(state, fi, f) * (state.faces[fi].area / 3.0);
        for &v in tri {
            acc[v] += g;
        }
    }
    acc.iter()
        .enumerate()
        .map(|(i, a)| state.projectors[i] * a / state.lumped_area[i])
        .collect()
}

/// Constant gradient of a P1 function on face `f`.
#[inline]
pub fn face_gradient(state: &SurfaceState, f: usize, values: &[f64]) -> Vec3 {
    let tri = &state.mesh.faces[f];
    let g = &state.faces[f].grads;
    g[0] * values[tri[0]] + g[1] * values[tri[1]] + g[2] * values[tri[2]]
}

/// Face Jacobian `(∇u)_{kl} = ∂_l u_k` of a P1 vector field.
#[inline]
pub fn face_vector_gradient(state: &SurfaceState, f: usize, u: &[Vec3]) -> Mat3 {
    let tri = &state.mesh.faces[f];
    let g = &state.faces[f].grads;
    u[tri[0]] * g[0].transpose() + u[tri[1]] * g[1].transpose() + u[tri[2]] * g[2].transpose()
}

/// Transport operator `C_ij = ∫ c (w·∇_Γψ_j) ψ_i` (scalar arity).
///
/// The product `c w` is interpolated nodally before the exact P1 mass weights.
pub fn advection(state: &SurfaceState, wind: &[Vec3], coeff: Coeff) -> SparseOperator {
    let mesh = &state.mesh;
    let mut asm = BlockAssembler::<1, 1>::new(mesh);
    for (tri, fg) in mesh.faces.iter().zip(&state.faces) {
        let cw: [Vec3; 3] = std::array::from_fn(|c| wind[tri[c]] * coeff.at(tri[c]));
        for a in 0..3 {
            // ∫ ψ_a (c w) = Σ_c M_ac (c w)_c with the unweighted local mass
            let mut avg = Vec3::zeros();
            for (c, v) in cw.iter().enumerate() {
                avg += v * (fg.area / if a == c { 6.0 } else { 12.0 });
            }
            for b in 0..3 {
                let v = avg.dot(&fg.grads[b]);
                asm.add(tri[a], tri[b], |_, _| v);
            }
        }
    }
    asm.finish(false)
}

/// Vector block mass `∫ c ψ_i ψ_j W_f` with one 3×3 matrix per face.
pub fn weighted_block_mass(state: &SurfaceState, coeff: Coeff, mats: &[Mat3]) -> SparseOperator {
    let mesh = &state.mesh;
    let mut asm = BlockAssembler::<3, 3>::new(mesh);
    for (f, tri) in mesh.faces.iter().enumerate() {
        let m = local_mass(state.faces[f].area, face_weights(&coeff, tri));
        let w = &mats[f];
        for a in 0..3 {
            for b in 0..3 {
                asm.add(tri[a], tri[b], |k, l| m[a][b] * w[(k, l)]);
            }
        }
    }
    asm.finish(mats.iter().all(|m| (m - m.transpose()).abs().max() == 0.0))
}

/// Load vector `∫ c ψ_i g` for a per-face constant vector `g` (interleaved).
pub fn face_vector_load(state: &SurfaceState, coeff: Coeff, g: &[Vec3]) -> Vec<f64> {
    let mut out = vec![0.0; 3 * state.n_vertices()];
    for (f, tri) in state.mesh.faces.iter().enumerate() {
        let m = local_mass(state.faces[f].area, face_weights(&coeff, tri));
        for a in 0..3 {
            let s = m[a][0] + m[a][1] + m[a][2];
            for k in 0..3 {
                out[3 * tri[a] + k] += s * g[f][k];
            }
        }
    }
    out
}

/// Load vector `∫ T_f : ∇_Γ(ψ_i e_k) = A_f (T_f g_i)_k` for per-face tensors.
pub fn tensor_load(state: &SurfaceState, tensors: &[Mat3]) -> Vec<f64> {
    let mut out = vec![0.0; 3 * state.n_vertices()];
    for (f, tri) in state.mesh.faces.iter().enumerate() {
        let fg = &state.faces[f];
        for a in 0..3 {
            let v = tensors[f] * fg.grads[a] * fg.area;
            for k in 0..3 {
                out[3 * tri[a] + k] += v[k];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{flatten, unflatten};
    use crate::linalg::{dot, solve_linear, ConstantMode, SolveOptions};
    use crate::mesh::make_icosphere;
    use proptest::prelude::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn sphere(s: u32, r: f64) -> SurfaceState {
        let mesh = Arc::new(make_icosphere(s, r).unwrap());
        SurfaceState::at_rest(mesh.clone(), mesh.vertices.clone(), 0.0).unwrap()
    }

    fn rotation(st: &SurfaceState) -> Vec<Vec3> {
        st.positions.iter().map(|x| Vec3::z().cross(x)).collect()
    }

    fn l2(st: &SurfaceState, e: &[f64]) -> f64 {
        mass(st, Coeff::Const(1.0)).bilinear(e, e).sqrt()
    }

    #[test]
    fn mass_partition_of_unity_and_lumping() {
        let st = sphere(4, 1.0);
        let m = mass(&st, Coeff::Const(1.0));
        assert!(m.check_symmetric(1e-14));
        let total: f64 = m.row_sums().iter().sum();
        assert!((total - 4.0 * PI).abs() / (4.0 * PI) < 3e-3);
        let lumped = lumped_mass(&st, Coeff::Const(1.0));
        assert!((lumped.iter().sum::<f64>() - st.area).abs() < 1e-12);
        let m2 = mass(&st, Coeff::Const(2.0));
        for (a, b) in m2.values.iter().zip(&m.values) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn nodal_weight_mass_is_exact_for_linear_weights() {
        // ∫ z · 1 · 1 = 0 and ∫ (1+z) = area on the symmetric icosphere
        let st = sphere(2, 1.0);
        let w: Vec<f64> = st.positions.iter().map(|x| 1.0 + x.z).collect();
        let m = mass(&st, Coeff::Nodal(&w));
        let total: f64 = m.row_sums().iter().sum();
        assert!((total - st.area).abs() < 1e-12);
        assert!(matches!(
            density_mass(&st, Coeff::Const(0.0)),
            Err(Error::Physics(_))
        ));
    }

    #[test]
    fn mass_is_positive_definite_on_a_small_mesh() {
        let st = sphere(1, 1.0);
        assert!(mass(&st, Coeff::Const(1.0)).to_dense().cholesky().is_some());
    }

    #[test]
    fn stiffness_kernel_and_poisson_convergence() {
        let mut errs = Vec::new();
        for s in [2, 3, 4] {
            let st = sphere(s, 1.0);
            let k = stiffness(&st, Coeff::Const(1.0));
            assert!(k.check_symmetric(1e-13));
            let ones = vec![1.0; st.n_vertices()];
            assert!(k.matvec(&ones).iter().all(|v| v.abs() < 1e-12));
            let z: Vec<f64> = st.positions.iter().map(|x| x.z).collect();
            let m = mass(&st, Coeff::Const(1.0));
            let rhs: Vec<f64> = m.matvec(&z).iter().map(|v| 2.0 * v).collect();
            let opts = SolveOptions::default()
                .nullspace(ConstantMode::scalar(Some(st.lumped_area.clone())));
            let u = solve_linear(&k, &rhs, &opts).unwrap().x;
            let e: Vec<f64> = u.iter().zip(&z).map(|(a, b)| a - b).collect();
            errs.push(l2(&st, &e) / l2(&st, &z));
        }
        assert!(
            errs[1] / errs[2] > 3.5 && errs[0] / errs[1] > 3.5,
            "{errs:?}"
        );
    }

    #[test]
    fn degree_two_forcing() {
        let st = sphere(4, 1.0);
        let k = stiffness(&st, Coeff::Const(1.0));
        let m = mass(&st, Coeff::Const(1.0));
        let q: Vec<f64> = st.positions.iter().map(|x| x.z * x.z - 1.0 / 3.0).collect();
        let rhs: Vec<f64> = m.matvec(&q).iter().map(|v| 6.0 * v).collect();
        let opts =
            SolveOptions::default().nullspace(ConstantMode::scalar(Some(st.lumped_area.clone())));
        let u = solve_linear(&k, &rhs, &opts).unwrap().x;
        let mean = dot(&st.lumped_area, &q) / st.area;
        let e: Vec<f64> = u.iter().zip(&q).map(|(a, b)| a - (b - mean)).collect();
        assert!(l2(&st, &e) / l2(&st, &q) < 1e-2);
    }

    #[test]
    fn rotations_are_in_the_deformation_kernel() {
        let st = sphere(3, 1.0);
        let a = deformation(&st, Coeff::Const(1.0), 0.1, 50.0).unwrap();
        assert!(a.check_symmetric(1e-12));
        for axis in [Vec3::x(), Vec3::y(), Vec3::z()] {
            let u = flatten(
                &st.positions
                    .iter()
                    .map(|x| axis.cross(x))
                    .collect::<Vec<_>>(),
            );
            assert!(a.bilinear(&u, &u) <= 1e-8 * dot(&u, &u));
            assert!(a.matvec(&u).iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn deformation_scaling_and_penalty() {
        let st = sphere(2, 1.0);
        let u: Vec<f64> = (0..3 * st.n_vertices())
            .map(|i| ((i * 13) % 7) as f64 - 3.0)
            .collect();
        let a1 = deformation(&st, Coeff::Const(1.0), 0.0, 0.0).unwrap();
        let a2 = deformation(&st, Coeff::Const(2.0), 0.0, 0.0).unwrap();
        assert!(
            (a2.bilinear(&u, &u) - 2.0 * a1.bilinear(&u, &u)).abs() < 1e-10 * a1.bilinear(&u, &u)
        );
        assert!(a1.bilinear(&u, &u) >= 0.0);
        let n = flatten(&st.normals);
        let pen = deformation(&st, Coeff::Const(1.0), 0.0, 7.0)
            .unwrap()
            .bilinear(&n, &n)
            - a1.bilinear(&n, &n);
        assert!((pen - 7.0 * st.area).abs() < 1e-10);
        assert!(matches!(
            deformation(&st, Coeff::Const(0.05), 0.1, 1.0),
            Err(Error::Physics(_))
        ));
    }

    #[test]
    fn divergence_of_rotation_and_gradient() {
        let st = sphere(4, 1.0);
        let b = divergence(&st);
        let rot = flatten(&rotation(&st));
        assert!(b.matvec(&rot).iter().all(|v| v.abs() < 1e-13));
        assert!(b.matvec(&vec![0.0; rot.len()]).iter().all(|v| *v == 0.0));
        // div ∇z = Δz = −2z weakly
        let z: Vec<f64> = st.positions.iter().map(|x| x.z).collect();
        let gz: Vec<Vec3> = st.positions.iter().map(|x| Vec3::z() - x * x.z).collect();
        let lhs = b.matvec(&flatten(&gz));
        let rhs: Vec<f64> = mass(&st, Coeff::Const(1.0))
            .matvec(&z)
            .iter()
            .map(|v| -2.0 * v)
            .collect();
        let err: f64 = lhs
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / scale < 0.05, "{}", err / scale);
    }

    #[test]
    fn advection_basics() {
        let st = sphere(4, 1.0);
        let nv = st.n_vertices();
        let zero = advection(&st, &vec![Vec3::zeros(); nv], Coeff::Const(1.0));
        assert!(zero.values.iter().all(|v| *v == 0.0));
        let rot = rotation(&st);
        let c = advection(&st, &rot, Coeff::Const(1.0));
        assert!(c.matvec(&vec![3.0; nv]).iter().all(|v| v.abs() < 1e-13));
        let z: Vec<f64> = st.positions.iter().map(|x| x.z).collect();
        let r = c.matvec(&z);
        let worst = r
            .iter()
            .zip(&st.lumped_area)
            .map(|(v, m)| (v / m).abs())
            .fold(0.0, f64::max);
        assert!(worst < 5e-2, "{worst}");
    }

    #[test]
    fn recovery_matches_operator() {
        let st = sphere(3, 1.0);
        let f: Vec<f64> = st.positions.iter().map(|x| x.x * x.y + x.z).collect();
        let a = flatten(&recover_gradient(&st, &f));
        let b = gradient_recovery(&st).matvec(&f);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
        assert!(st.tangency_defect(&unflatten(&a)) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn assembly_is_linear_in_the_weight(
            w1 in prop::collection::vec(0.5f64..2.0, 42),
            w2 in prop::collection::vec(0.5f64..2.0, 42),
            s in 0.1f64..3.0,
        ) {
            let st = sphere(1, 1.0);
            let mix: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a + s * b).collect();
            let x: Vec<f64> = (0..42).map(|i| (i as f64).sin()).collect();
            let x3: Vec<f64> = (0..126).map(|i| (i as f64 * 0.3).cos()).collect();
            for op in [mass, stiffness] {
                let lhs = op(&st, Coeff::Nodal(&mix)).matvec(&x);
                let a = op(&st, Coeff::Nodal(&w1)).matvec(&x);
                let b = op(&st, Coeff::Nodal(&w2)).matvec(&x);
                for i in 0..42 { prop_assert!((lhs[i] - a[i] - s * b[i]).abs() < 1e-12); }
            }
            let d = |w: &[f64]| deformation(&st, Coeff::Nodal(w), 0.0, 0.0).unwrap().matvec(&x3);
            let (lhs, a, b) = (d(&mix), d(&w1), d(&w2));
            for i in 0..126 { prop_assert!((lhs[i] - a[i] - s * b[i]).abs() < 1e-11); }
        }
    }
}
