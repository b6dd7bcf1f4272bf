//! Discrete closed surfaces: triangle meshes with derived adjacency,
//! geometric measurements and per-element quality.
//!
//! A [`SurfaceMesh`] is the moving computational domain. Connectivity is
//! fixed at construction; vertex motion goes through [`SurfaceMesh::displaced`]
//! and topology changes through the remesher, which builds a new mesh.

use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Triangles with area below this fraction of the mean element area are
/// rejected as degenerate (below double-precision usefulness).
pub const DEGENERATE_REL_AREA: f64 = 1e-14;

/// Area, outward unit normal and diameter (longest edge) of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub area: f64,
    pub normal: Vec3,
    pub diameter: f64,
}

/// Per-element shape/size quality and their global minima.
///
/// `q_shape = 12*sqrt(3)*A_K/P_K^2` is 1 exactly for equilateral triangles;
/// `q_size = min(h*(kappa_K)/h_K, 1)` penalizes elements coarser than the
/// sizing target.
#[derive(Debug, Clone)]
pub struct QualityReport {
    pub q_shape: Vec<f64>,
    pub q_size: Vec<f64>,
    pub shape_min: f64,
    pub size_min: f64,
    pub h_min: f64,
    pub h_max: f64,
}

/// A closed, consistently oriented triangulated surface in 3D.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    positions: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_triangles: Vec<[usize; 2]>,
    vertex_triangles: Vec<Vec<usize>>,
}

impl SurfaceMesh {
    /// Build a mesh and verify the closed-manifold invariants: every edge
    /// shared by exactly two triangles, traversed in opposite directions,
    /// and no degenerate elements. Global orientation (inward/outward) is
    /// not constrained here; see [`SurfaceMesh::oriented_outward`].
    pub fn new(positions: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = positions.len();
        if n < 4 || triangles.len() < 4 {
            return Err(Error::Topology(format!(
                "too small to be a closed surface: {} vertices, {} triangles",
                n,
                triangles.len()
            )));
        }
        for (k, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(Error::Topology(format!(
                        "triangle {k} references vertex {v} out of {n}"
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Topology(format!("triangle {k} repeats a vertex")));
            }
        }
        for p in &positions {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::Topology("non-finite vertex position".into()));
            }
        }

        // Each undirected edge must occur exactly twice, once per direction.
        let mut edge_map: HashMap<(usize, usize), (usize, [i64; 2])> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_tris: Vec<[i64; 2]> = Vec::new();
        for (k, tri) in triangles.iter().enumerate() {
            for e in 0..3 {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                let key = (a.min(b), a.max(b));
                let forward = a < b; // direction relative to the canonical key
                let entry = edge_map.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_tris.push([-1, -1]);
                    (edges.len() - 1, [-1, -1])
                });
                let slot = if forward { 0 } else { 1 };
                if entry.1[slot] >= 0 {
                    return Err(Error::Topology(format!(
                        "edge ({},{}) traversed twice in the same direction; inconsistent orientation or non-manifold",
                        key.0, key.1
                    )));
                }
                entry.1[slot] = k as i64;
                edge_tris[entry.0][slot] = k as i64;
            }
        }
        for (e, et) in edge_tris.iter().enumerate() {
            if et[0] < 0 || et[1] < 0 {
                return Err(Error::Topology(format!(
                    "boundary edge ({},{}): surface is not closed",
                    edges[e][0], edges[e][1]
                )));
            }
        }
        let edge_triangles: Vec<[usize; 2]> =
            edge_tris.iter().map(|et| [et[0] as usize, et[1] as usize]).collect();

        let mut vertex_triangles = vec![Vec::new(); n];
        for (k, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_triangles[v].push(k);
            }
        }
        for (v, inc) in vertex_triangles.iter().enumerate() {
            if inc.is_empty() {
                return Err(Error::Topology(format!("vertex {v} is unreferenced")));
            }
        }

        let mesh = Self {
            positions,
            triangles,
            edges,
            edge_triangles,
            vertex_triangles,
        };

        // Degeneracy gate relative to the mean element area.
        let total = mesh.total_area();
        let floor = DEGENERATE_REL_AREA * total / mesh.triangles.len() as f64;
        for k in 0..mesh.triangles.len() {
            let [p0, p1, p2] = mesh.triangle_positions(k);
            let area = 0.5 * (p1 - p0).cross(&(p2 - p0)).norm();
            if !(area > floor) {
                return Err(Error::InvalidElement {
                    element: k,
                    reason: format!("degenerate triangle (area {area:.3e})"),
                });
            }
        }
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Undirected edges as canonical (lo, hi) vertex pairs.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// The two triangles incident to each edge, aligned with [`Self::edges`].
    pub fn edge_triangles(&self) -> &[[usize; 2]] {
        &self.edge_triangles
    }

    pub fn vertex_triangles(&self) -> &[Vec<usize>] {
        &self.vertex_triangles
    }

    pub fn triangle_positions(&self, k: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[k];
        [self.positions[a], self.positions[b], self.positions[c]]
    }

    /// Area, outward unit normal and diameter `h_K` (longest edge) of
    /// element `k`. Collinear vertices are reported as an invalid element.
    pub fn element_geometry(&self, k: usize) -> Result<ElementGeometry> {
        if k >= self.triangles.len() {
            return Err(Error::InvalidElement {
                element: k,
                reason: "element index out of range".into(),
            });
        }
        let [p0, p1, p2] = self.triangle_positions(k);
        let cross = (p1 - p0).cross(&(p2 - p0));
        let doubled = cross.norm();
        let h = (p1 - p0)
            .norm()
            .max((p2 - p1).norm())
            .max((p0 - p2).norm());
        if doubled <= f64::MIN_POSITIVE.sqrt() || doubled < 1e-14 * h * h {
            return Err(Error::InvalidElement {
                element: k,
                reason: "collinear vertices".into(),
            });
        }
        Ok(ElementGeometry {
            area: 0.5 * doubled,
            normal: cross / doubled,
            diameter: h,
        })
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|k| {
                let [p0, p1, p2] = self.triangle_positions(k);
                0.5 * (p1 - p0).cross(&(p2 - p0)).norm()
            })
            .sum()
    }

    /// Signed enclosed volume, `(1/3) sum_K A_K (centroid_K . n_K)`.
    /// Positive when element normals point outward.
    pub fn enclosed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|k| {
                let [p0, p1, p2] = self.triangle_positions(k);
                let centroid = (p0 + p1 + p2) / 3.0;
                let area_normal = 0.5 * (p1 - p0).cross(&(p2 - p0));
                centroid.dot(&area_normal) / 3.0
            })
            .sum()
    }

    /// Reduced volume `v = 6 sqrt(pi) V / A^(3/2)`; 1 for a sphere.
    pub fn reduced_volume(&self) -> f64 {
        let area = self.total_area();
        6.0 * std::f64::consts::PI.sqrt() * self.enclosed_volume() / area.powf(1.5)
    }

    /// Uniformly rescale so the total area becomes `4 pi`.
    pub fn normalize_area(&self) -> Self {
        let scale = (4.0 * std::f64::consts::PI / self.total_area()).sqrt();
        self.with_positions(self.positions.iter().map(|p| p * scale).collect())
    }

    /// Same connectivity, new vertex positions. Adjacency is reused.
    pub fn with_positions(&self, positions: Vec<Vec3>) -> Self {
        assert_eq!(positions.len(), self.positions.len());
        Self {
            positions,
            triangles: self.triangles.clone(),
            edges: self.edges.clone(),
            edge_triangles: self.edge_triangles.clone(),
            vertex_triangles: self.vertex_triangles.clone(),
        }
    }

    /// Move every vertex by `dt * u` and verify no element degenerated.
    pub fn displaced(&self, velocity: &[Vec3], dt: f64) -> Result<Self> {
        assert_eq!(velocity.len(), self.positions.len());
        let positions: Vec<Vec3> = self
            .positions
            .iter()
            .zip(velocity)
            .map(|(p, u)| p + dt * u)
            .collect();
        let moved = self.with_positions(positions);
        let floor = DEGENERATE_REL_AREA * moved.total_area() / moved.n_triangles() as f64;
        for k in 0..moved.n_triangles() {
            let [p0, p1, p2] = moved.triangle_positions(k);
            let area = 0.5 * (p1 - p0).cross(&(p2 - p0)).norm();
            if !(area.is_finite() && area > floor) {
                return Err(Error::Instability(format!(
                    "element {k} degenerated during the Lagrangian update"
                )));
            }
        }
        Ok(moved)
    }

    /// Flip the orientation of every triangle.
    pub fn flipped(&self) -> Self {
        let triangles = self.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect();
        Self::new(self.positions.clone(), triangles).expect("flip preserves validity")
    }

    /// Ensure outward orientation (positive enclosed volume).
    pub fn oriented_outward(self) -> Self {
        if self.enclosed_volume() < 0.0 {
            self.flipped()
        } else {
            self
        }
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|&[a, b]| (self.positions[a] - self.positions[b]).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|&[a, b]| (self.positions[a] - self.positions[b]).norm())
            .fold(0.0, f64::max)
    }

    /// V - E + F; 2 for a genus-0 closed surface.
    pub fn euler_characteristic(&self) -> i64 {
        self.positions.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    /// Area-weighted average of incident element normals (used by tests and
    /// IO; the scheme itself derives normals from the curvature field).
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut normals = vec![Vec3::zeros(); self.positions.len()];
        for k in 0..self.triangles.len() {
            let [p0, p1, p2] = self.triangle_positions(k);
            let area_normal = 0.5 * (p1 - p0).cross(&(p2 - p0));
            for &v in &self.triangles[k] {
                normals[v] += area_normal;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }

    /// Lumped vertex areas `A_J = sum_{K incident to J} A_K / 3`.
    pub fn lumped_vertex_areas(&self) -> Vec<f64> {
        let mut areas = vec![0.0; self.positions.len()];
        for k in 0..self.triangles.len() {
            let [p0, p1, p2] = self.triangle_positions(k);
            let third = 0.5 * (p1 - p0).cross(&(p2 - p0)).norm() / 3.0;
            for &v in &self.triangles[k] {
                areas[v] += third;
            }
        }
        areas
    }

    /// Shape and size quality of every element against a per-vertex sizing
    /// target `h_star` (element target = mean of its three vertex targets).
    pub fn quality(&self, h_star: &[f64]) -> Result<QualityReport> {
        if h_star.len() != self.positions.len() {
            return Err(Error::Parameter(format!(
                "sizing field length {} does not match vertex count {}",
                h_star.len(),
                self.positions.len()
            )));
        }
        if let Some(j) = h_star.iter().position(|&h| !(h > 0.0)) {
            return Err(Error::Parameter(format!(
                "sizing field must be positive (vertex {j})"
            )));
        }
        let mut q_shape = Vec::with_capacity(self.triangles.len());
        let mut q_size = Vec::with_capacity(self.triangles.len());
        for (k, tri) in self.triangles.iter().enumerate() {
            let [p0, p1, p2] = self.triangle_positions(k);
            let area = 0.5 * (p1 - p0).cross(&(p2 - p0)).norm();
            let l0 = (p1 - p0).norm();
            let l1 = (p2 - p1).norm();
            let l2 = (p0 - p2).norm();
            let perimeter = l0 + l1 + l2;
            q_shape.push(12.0 * 3f64.sqrt() * area / (perimeter * perimeter));
            let target = (h_star[tri[0]] + h_star[tri[1]] + h_star[tri[2]]) / 3.0;
            let h_k = l0.max(l1).max(l2);
            q_size.push((target / h_k).min(1.0));
        }
        let shape_min = q_shape.iter().copied().fold(f64::INFINITY, f64::min);
        let size_min = q_size.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(QualityReport {
            q_shape,
            q_size,
            shape_min,
            size_min,
            h_min: self.min_edge_length(),
            h_max: self.max_edge_length(),
        })
    }
}
