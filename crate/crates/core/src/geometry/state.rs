//! Time-slice geometry: normals, curvatures, projectors and the corrected normal velocity.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector2};
use rayon::prelude::*;

use super::preset::GeometryPreset;
use crate::error::{Error, Result};
use crate::mesh::{TriMesh, Vec3};

pub type Mat3 = Matrix3<f64>;

/// Per-face quantities on one slice.
#[derive(Debug, Clone, Copy)]
pub struct FaceGeom {
    pub area: f64,
    /// Unit outward face normal.
    pub normal: Vec3,
    /// Tangential gradients of the three barycentric hat functions.
    pub grads: [Vec3; 3],
    /// Interior angles at the local vertices.
    pub angles: [f64; 3],
    /// Cotangents of the interior angles.
    pub cot: [f64; 3],
}

impl FaceGeom {
    pub fn new(a: &Vec3, b: &Vec3, c: &Vec3) -> Self {
        let x = [a, b, c];
        let cross = (b - a).cross(&(c - a));
        let dbl = cross.norm();
        let normal = cross / dbl;
        let area = 0.5 * dbl;
        let mut grads = [Vec3::zeros(); 3];
        let mut angles = [0.0; 3];
        let mut cot = [0.0; 3];
        for k in 0..3 {
            let (p, q) = (x[(k + 1) % 3], x[(k + 2) % 3]);
            grads[k] = normal.cross(&(q - p)) / dbl;
            let (u, v) = (p - x[k], q - x[k]);
            let s = u.cross(&v).norm();
            let d = u.dot(&v);
            angles[k] = s.atan2(d);
            cot[k] = d / s;
        }
        FaceGeom {
            area,
            normal,
            grads,
            angles,
            cot,
        }
    }

    /// Projector onto the face plane.
    pub fn projector(&self) -> Mat3 {
        Mat3::identity() - self.normal * self.normal.transpose()
    }
}

/// Geometry needed to evaluate the corrected normal velocity (the part
/// recomputed at every Runge–Kutta stage).
#[derive(Debug, Clone)]
pub struct BaseGeometry {
    pub faces: Vec<FaceGeom>,
    pub normals: Vec<Vec3>,
    /// Mixed Voronoi vertex areas; they sum to the total area.
    pub mixed_area: Vec<f64>,
    /// Mean curvature (sum of principal curvatures, +2 on the unit sphere).
    pub mean_curv: Vec<f64>,
}

impl BaseGeometry {
    pub fn compute(mesh: &TriMesh, positions: &[Vec3]) -> Result<Self> {
        mesh.check_positions(positions)?;
        let faces: Vec<FaceGeom> = mesh
            .faces
            .par_iter()
            .map(|&[a, b, c]| FaceGeom::new(&positions[a], &positions[b], &positions[c]))
            .collect();

        let nv = mesh.n_vertices();
        let mut angle_normal = vec![Vec3::zeros(); nv];
        let mut lap = vec![Vec3::zeros(); nv];
        let mut mixed_area = vec![0.0; nv];
        for (tri, fg) in mesh.faces.iter().zip(&faces) {
            for k in 0..3 {
                angle_normal[tri[k]] += fg.normal * fg.angles[k];
            }
            // Cotangent Laplacian of the embedding: edge opposite k weighted by cot k / 2.
            for k in 0..3 {
                let (i, j) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let w = 0.5 * fg.cot[k];
                let d = (positions[i] - positions[j]) * w;
                lap[i] += d;
                lap[j] -= d;
            }
            let obtuse = (0..3).find(|&k| fg.angles[k] > std::f64::consts::FRAC_PI_2);
            for k in 0..3 {
                let add = match obtuse {
                    Some(o) if o == k => 0.5 * fg.area,
                    Some(_) => 0.25 * fg.area,
                    None => {
                        let (j, l) = ((k + 1) % 3, (k + 2) % 3);
                        let xi = positions[tri[k]];
                        let eij = (positions[tri[j]] - xi).norm_squared();
                        let eil = (positions[tri[l]] - xi).norm_squared();
                        // edge (k,j) is opposite l, edge (k,l) opposite j
                        0.125 * (eij * fg.cot[l] + eil * fg.cot[j])
                    }
                };
                mixed_area[tri[k]] += add;
            }
        }

        let normals: Vec<Vec3> = (0..nv)
            .into_par_iter()
            .map(|i| {
                let fallback = angle_normal[i].normalize();
                sphere_fit_normal(positions, i, &mesh.vertex_neighbors[i], &fallback)
            })
            .collect();

        let mean_curv = (0..nv)
            .map(|i| lap[i].dot(&normals[i]) / mixed_area[i])
            .collect();

        Ok(BaseGeometry {
            faces,
            normals,
            mixed_area,
            mean_curv,
        })
    }

    /// `∫ f g dσ` with the mixed-area vertex quadrature used for the constraint.
    pub fn vertex_integral(&self, f: &[f64], g: &[f64]) -> f64 {
        self.mixed_area
            .iter()
            .zip(f.iter().zip(g))
            .map(|(a, (x, y))| a * x * y)
            .sum()
    }

    /// Inextensibility correction `raw − (∫H raw / ∫H²) H`.
    pub fn enforce_inextensibility(&self, raw: &[f64]) -> Result<Vec<f64>> {
        remove_mean_curvature_component(&self.mixed_area, &self.mean_curv, raw)
    }
}

/// `raw − (∫H raw / ∫H²) H` with mixed-area quadrature.
pub(crate) fn remove_mean_curvature_component(
    area: &[f64],
    h: &[f64],
    raw: &[f64],
) -> Result<Vec<f64>> {
    let mut hh = 0.0;
    let mut hr = 0.0;
    for i in 0..h.len() {
        hh += area[i] * h[i] * h[i];
        hr += area[i] * h[i] * raw[i];
    }
    if !(hh > 1e-8) {
        return Err(Error::Geometry(format!(
            "inextensibility not enforceable: ∫H² = {hh:e}"
        )));
    }
    let c = hr / hh;
    Ok(raw.iter().zip(h).map(|(r, hi)| r - c * hi).collect())
}

/// Unit normal from the gradient of the algebraic sphere through `x_i` that
/// best fits the one-ring. Exact for spheres and planes; falls back to the
/// angle-weighted normal when the fit is ill-posed or disagrees with it.
fn sphere_fit_normal(pos: &[Vec3], i: usize, ring: &[usize], fallback: &Vec3) -> Vec3 {
    let xi = pos[i];
    let ell = ring.iter().map(|&j| (pos[j] - xi).norm()).sum::<f64>() / ring.len() as f64;
    let mut s = Mat3::zeros();
    let mut w = Vec3::zeros();
    let mut q = 0.0;
    for &j in ring {
        let y = (pos[j] - xi) / ell;
        let r2 = y.norm_squared();
        s += y * y.transpose();
        w += y * r2;
        q += r2 * r2;
    }
    s -= w * w.transpose() / q;
    let eig = SymmetricEigen::new(s);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (lo, mid) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    if !(mid > 1e-6 * eig.eigenvalues[order[2]].abs().max(1e-300)) || lo > 0.5 * mid {
        return *fallback;
    }
    let mut n: Vec3 = eig.eigenvectors.column(order[0]).into_owned();
    if n.dot(fallback) < 0.0 {
        n = -n;
    }
    if n.dot(fallback) < 0.85 {
        return *fallback;
    }
    n.normalize()
}

/// Orthonormal tangent basis `(t1, t2)` with `t1 × t2 = n`.
pub fn tangent_basis(n: &Vec3) -> (Vec3, Vec3) {
    let a = if n.x.abs() < 0.6 {
        Vec3::x()
    } else if n.y.abs() < 0.6 {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let t1 = (a - n * n.dot(&a)).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

/// Complete geometry of one time slice.
#[derive(Debug, Clone)]
pub struct SurfaceState {
    pub mesh: Arc<TriMesh>,
    pub t: f64,
    pub positions: Vec<Vec3>,
    pub faces: Vec<FaceGeom>,
    pub normals: Vec<Vec3>,
    pub mean_curv: Vec<f64>,
    /// Per-face Weingarten map `∇_Γ n` (symmetric, tangential).
    pub weingarten: Vec<Mat3>,
    pub gauss_curv: Vec<f64>,
    pub projectors: Vec<Mat3>,
    /// Inextensibility-corrected normal velocity.
    pub v_n: Vec<f64>,
    pub mixed_area: Vec<f64>,
    /// Row sums of the P1 mass matrix (a third of the incident face areas).
    pub lumped_area: Vec<f64>,
    pub area: f64,
    /// Mean edge length, the mesh size `h`.
    pub h: f64,
}

impl SurfaceState {
    /// Full geometry at `positions`, with `v_n` sampled from `preset` and corrected.
    pub fn compute(
        mesh: Arc<TriMesh>,
        positions: Vec<Vec3>,
        t: f64,
        preset: &GeometryPreset,
    ) -> Result<Self> {
        let base = BaseGeometry::compute(&mesh, &positions)?;
        let raw: Vec<f64> = positions
            .iter()
            .map(|x| preset.raw_normal_velocity(x, t))
            .collect();
        let v_n = if preset.is_stationary() {
            raw
        } else {
            base.enforce_inextensibility(&raw)?
        };
        Ok(Self::assemble(mesh, positions, t, base, v_n))
    }

    /// Geometry with a given normal velocity (used by oracles and for plain maps).
    pub fn with_normal_velocity(
        mesh: Arc<TriMesh>,
        positions: Vec<Vec3>,
        t: f64,
        v_n: Vec<f64>,
    ) -> Result<Self> {
        let base = BaseGeometry::compute(&mesh, &positions)?;
        Ok(Self::assemble(mesh, positions, t, base, v_n))
    }

    /// Geometry of a surface at rest.
    pub fn at_rest(mesh: Arc<TriMesh>, positions: Vec<Vec3>, t: f64) -> Result<Self> {
        let n = positions.len();
        Self::with_normal_velocity(mesh, positions, t, vec![0.0; n])
    }

    fn assemble(
        mesh: Arc<TriMesh>,
        positions: Vec<Vec3>,
        t: f64,
        base: BaseGeometry,
        v_n: Vec<f64>,
    ) -> Self {
        let nv = mesh.n_vertices();
        let BaseGeometry {
            faces,
            normals,
            mixed_area,
            mean_curv,
        } = base;

        let mut defect = vec![2.0 * std::f64::consts::PI; nv];
        let mut lumped_area = vec![0.0; nv];
        for (tri, fg) in mesh.faces.iter().zip(&faces) {
            for k in 0..3 {
                defect[tri[k]] -= fg.angles[k];
                lumped_area[tri[k]] += fg.area / 3.0;
            }
        }
        let gauss_curv = defect.iter().zip(&mixed_area).map(|(d, a)| d / a).collect();
        let projectors = normals
            .iter()
            .map(|n| Mat3::identity() - n * n.transpose())
            .collect();
        let weingarten = (0..mesh.n_faces())
            .into_par_iter()
            .map(|f| fit_weingarten(&mesh, &positions, &normals, &faces[f], f))
            .collect();
        let area = faces.iter().map(|f| f.area).sum();
        let h = mesh.mean_edge_length(&positions);

        SurfaceState {
            mesh,
            t,
            positions,
            faces,
            normals,
            mean_curv,
            weingarten,
            gauss_curv,
            projectors,
            v_n,
            mixed_area,
            lumped_area,
            area,
            h,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    /// Total angle defect; equals `2π χ` exactly.
    pub fn total_angle_defect(&self) -> f64 {
        self.gauss_curv
            .iter()
            .zip(&self.mixed_area)
            .map(|(k, a)| k * a)
            .sum()
    }

    /// `∫ f g dσ` with the mixed-area quadrature.
    pub fn vertex_integral(&self, f: &[f64], g: &[f64]) -> f64 {
        self.mixed_area
            .iter()
            .zip(f.iter().zip(g))
            .map(|(a, (x, y))| a * x * y)
            .sum()
    }

    /// `∫ H v_n dσ` normalised by `‖H‖ ‖v_n‖` (0 when `v_n ≡ 0`).
    pub fn constraint_residual(&self) -> f64 {
        let num = self.vertex_integral(&self.mean_curv, &self.v_n);
        let hh = self.vertex_integral(&self.mean_curv, &self.mean_curv);
        let vv = self.vertex_integral(&self.v_n, &self.v_n);
        if vv == 0.0 {
            0.0
        } else {
            num.abs() / (hh * vv).sqrt()
        }
    }

    /// Inextensibility projection of a raw normal velocity on this slice.
    pub fn enforce_inextensibility(&self, raw: &[f64]) -> Result<Vec<f64>> {
        remove_mean_curvature_component(&self.mixed_area, &self.mean_curv, raw)
    }

    /// Tangential part of a vertex vector field.
    pub fn project_tangent(&self, field: &[Vec3]) -> Vec<Vec3> {
        field
            .iter()
            .zip(&self.normals)
            .map(|(f, n)| f - n * n.dot(f))
            .collect()
    }

    /// Largest `|f·n|` relative to the largest `|f|`.
    pub fn tangency_defect(&self, field: &[Vec3]) -> f64 {
        let scale = field.iter().map(|f| f.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        field
            .iter()
            .zip(&self.normals)
            .map(|(f, n)| f.dot(n).abs())
            .fold(0.0, f64::max)
            / scale
    }
}

/// Least-squares fit of `∇_Γ n` over the face and the three vertices across
/// its edges, symmetrised and projected onto the face plane.
fn fit_weingarten(mesh: &TriMesh, pos: &[Vec3], normals: &[Vec3], fg: &FaceGeom, f: usize) -> Mat3 {
    let tri = mesh.faces[f];
    let mut pts = [0usize; 6];
    pts[..3].copy_from_slice(&tri);
    for k in 0..3 {
        let g = mesh.face_neighbors[f][k];
        let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
        pts[3 + k] = mesh.faces[g]
            .iter()
            .copied()
            .find(|&v| v != a && v != b)
            .expect("neighbour face shares exactly one edge");
    }
    let (t1, t2) = tangent_basis(&fg.normal);
    let xc = pts.iter().map(|&v| pos[v]).sum::<Vec3>() / 6.0;
    let nc = pts.iter().map(|&v| normals[v]).sum::<Vec3>() / 6.0;
    let mut xx = Matrix2::zeros();
    let mut nx = nalgebra::Matrix3x2::zeros();
    for &v in &pts {
        let d = pos[v] - xc;
        let xi = Vector2::new(d.dot(&t1), d.dot(&t2));
        xx += xi * xi.transpose();
        nx += (normals[v] - nc) * xi.transpose();
    }
    let g = nx * xx.try_inverse().unwrap_or_else(Matrix2::zeros);
    let tb = nalgebra::Matrix3x2::from_columns(&[t1, t2]);
    let grad = fg.projector() * g * tb.transpose();
    0.5 * (grad + grad.transpose())
}
