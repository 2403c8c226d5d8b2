//! Fixed-connectivity triangle meshes and the icosphere generator.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Largest accepted icosphere subdivision level (≈ 164k vertices).
pub const MAX_SUBDIVISIONS: u32 = 7;

pub type Vec3 = Vector3<f64>;

/// Closed, consistently oriented triangle mesh on the reference surface.
///
/// Connectivity never changes during a run; evolving positions are stored
/// separately and paired with the same `TriMesh`.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    /// Unique undirected edges, `a < b`.
    pub edges: Vec<[usize; 2]>,
    /// Faces incident to each vertex.
    pub vertex_faces: Vec<Vec<usize>>,
    /// One-ring neighbours, sorted ascending.
    pub vertex_neighbors: Vec<Vec<usize>>,
    /// `face_neighbors[f][a]` is the face across the edge opposite local vertex `a`.
    pub face_neighbors: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Builds a mesh and checks it is a closed oriented 2-manifold with
    /// outward orientation and no degenerate faces.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        let mut directed: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for (f, tri) in faces.iter().enumerate() {
            for a in 0..3 {
                if tri[a] >= nv {
                    return Err(Error::Geometry(format!(
                        "face {f} references vertex {} of {nv}",
                        tri[a]
                    )));
                }
                let (i, j) = (tri[(a + 1) % 3], tri[(a + 2) % 3]);
                if i == j {
                    return Err(Error::Geometry(format!("face {f} repeats vertex {i}")));
                }
                if directed.insert((i, j), (f, a)).is_some() {
                    return Err(Error::Geometry(format!(
                        "edge ({i},{j}) used twice with the same orientation (face {f})"
                    )));
                }
            }
        }
        let mut face_neighbors = vec![[usize::MAX; 3]; faces.len()];
        let mut edges = Vec::with_capacity(directed.len() / 2);
        for (&(i, j), &(f, a)) in &directed {
            match directed.get(&(j, i)) {
                Some(&(g, _)) => {
                    face_neighbors[f][a] = g;
                    if i < j {
                        edges.push([i, j]);
                    }
                }
                None => {
                    return Err(Error::Geometry(format!(
                        "edge ({i},{j}) of face {f} is a boundary edge; mesh must be closed"
                    )))
                }
            }
        }
        edges.sort_unstable();

        let mut vertex_faces = vec![Vec::new(); nv];
        let mut vertex_neighbors = vec![Vec::new(); nv];
        for (f, tri) in faces.iter().enumerate() {
            for a in 0..3 {
                vertex_faces[tri[a]].push(f);
            }
        }
        for &[i, j] in &edges {
            vertex_neighbors[i].push(j);
            vertex_neighbors[j].push(i);
        }
        for (i, nb) in vertex_neighbors.iter_mut().enumerate() {
            if nb.is_empty() {
                return Err(Error::Geometry(format!("vertex {i} is isolated")));
            }
            nb.sort_unstable();
        }

        let mesh = TriMesh {
            vertices,
            faces,
            edges,
            vertex_faces,
            vertex_neighbors,
            face_neighbors,
        };
        mesh.check_positions(&mesh.vertices)?;
        if signed_volume(&mesh.faces, &mesh.vertices) <= 0.0 {
            return Err(Error::Geometry("faces are oriented inward".into()));
        }
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    /// Rejects degenerate faces for the given positions.
    pub fn check_positions(&self, positions: &[Vec3]) -> Result<()> {
        if positions.len() != self.vertices.len() {
            return Err(Error::Contract(format!(
                "{} positions for {} vertices",
                positions.len(),
                self.vertices.len()
            )));
        }
        for (f, tri) in self.faces.iter().enumerate() {
            let [a, b, c] = tri.map(|i| positions[i]);
            let area2 = (b - a).cross(&(c - a)).norm();
            let scale = (b - a).norm_squared().max((c - a).norm_squared());
            if !(area2 > 1e-14 * scale) {
                return Err(Error::Geometry(format!("face {f} is degenerate")));
            }
        }
        Ok(())
    }

    /// Mean edge length for the given positions.
    pub fn mean_edge_length(&self, positions: &[Vec3]) -> f64 {
        let total: f64 = self
            .edges
            .iter()
            .map(|&[i, j]| (positions[i] - positions[j]).norm())
            .sum();
        total / self.edges.len() as f64
    }

    /// Smallest normalised radius ratio `2 r_in / r_circ` over all faces (1 for equilateral).
    pub fn min_radius_ratio(&self, positions: &[Vec3]) -> (f64, usize) {
        let mut worst = (f64::INFINITY, 0);
        for (f, tri) in self.faces.iter().enumerate() {
            let [a, b, c] = tri.map(|i| positions[i]);
            let q = radius_ratio(&a, &b, &c);
            if q < worst.0 {
                worst = (q, f);
            }
        }
        worst
    }
}

/// `2 r_in / r_circ` of a triangle.
pub fn radius_ratio(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let la = (b - c).norm();
    let lb = (c - a).norm();
    let lc = (a - b).norm();
    let area = 0.5 * (b - a).cross(&(c - a)).norm();
    let p = la + lb + lc;
    if p == 0.0 {
        return 0.0;
    }
    16.0 * area * area / (p * la * lb * lc)
}

/// Six times the enclosed volume; positive for outward orientation.
pub fn signed_volume(faces: &[[usize; 3]], positions: &[Vec3]) -> f64 {
    faces
        .iter()
        .map(|&[a, b, c]| positions[a].dot(&positions[b].cross(&positions[c])))
        .sum()
}

/// Icosahedron refined `subdivisions` times by edge midpoints, projected to
/// the sphere of the given radius.
pub fn make_icosphere(subdivisions: u32, radius: f64) -> Result<TriMesh> {
    if subdivisions > MAX_SUBDIVISIONS {
        return Err(Error::config(
            "geometry.subdivisions",
            format!("{subdivisions} exceeds the limit {MAX_SUBDIVISIONS}"),
        ));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::config("geometry.radius", "must be positive"));
    }
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, g, 0.0],
        [1.0, g, 0.0],
        [-1.0, -g, 0.0],
        [1.0, -g, 0.0],
        [0.0, -1.0, g],
        [0.0, 1.0, g],
        [0.0, -1.0, -g],
        [0.0, 1.0, -g],
        [g, 0.0, -1.0],
        [g, 0.0, 1.0],
        [-g, 0.0, -1.0],
        [-g, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |i: usize, j: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (i.min(j), i.max(j));
            *midpoint.entry(key).or_insert_with(|| {
                verts.push(((verts[i] + verts[j]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for v in &mut verts {
        *v *= radius;
    }
    if signed_volume(&faces, &verts) < 0.0 {
        for f in &mut faces {
            f.swap(1, 2);
        }
    }
    TriMesh::new(verts, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosahedron_counts() {
        let m = make_icosphere(0, 1.0).unwrap();
        assert_eq!(m.n_vertices(), 12);
        assert_eq!(m.n_faces(), 20);
        assert_eq!(m.edges.len(), 30);
    }

    #[test]
    fn vertex_count_formula() {
        for s in 0..=4u32 {
            let m = make_icosphere(s, 1.0).unwrap();
            assert_eq!(m.n_vertices(), 10 * 4usize.pow(s) + 2);
            assert_eq!(m.n_faces(), 20 * 4usize.pow(s));
        }
        let m = make_icosphere(2, 1.0).unwrap();
        assert_eq!((m.n_vertices(), m.n_faces()), (162, 320));
    }

    #[test]
    fn radius_is_exact() {
        let m = make_icosphere(3, 2.0).unwrap();
        for v in &m.vertices {
            assert!((v.norm() - 2.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn subdivision_guard() {
        assert!(matches!(make_icosphere(8, 1.0), Err(Error::Config { .. })));
    }

    #[test]
    fn icosahedron_is_equilateral() {
        let m = make_icosphere(0, 1.0).unwrap();
        let (q, _) = m.min_radius_ratio(&m.vertices);
        assert!((q - 1.0).abs() < 1e-12);
        for nb in &m.face_neighbors {
            assert!(nb.iter().all(|&g| g != usize::MAX));
        }
    }

    #[test]
    fn rejects_open_and_flipped_meshes() {
        let m = make_icosphere(0, 1.0).unwrap();
        let open: Vec<_> = m.faces[1..].to_vec();
        assert!(TriMesh::new(m.vertices.clone(), open).is_err());
        let flipped: Vec<_> = m.faces.iter().map(|&[a, b, c]| [a, c, b]).collect();
        assert!(TriMesh::new(m.vertices.clone(), flipped).is_err());
    }
}
