//! Quality-gated adaptive remeshing by local edge operations.
//!
//! The mesh is rebuilt whenever its shape or size quality drops below the
//! configured thresholds. One remesh applies repeated passes of
//!
//!   1. split edges longer than 4/3 of the local sizing target,
//!   2. collapse edges shorter than 4/5 of the target,
//!   3. flip edges when that improves the worst shape quality nearby,
//!   4. tangential smoothing followed by closest-point projection onto the
//!      pre-remesh surface,
//!
//! so new vertices always lie on the old surface and the area/volume drift
//! stays small. The sizing target follows the solved curvature field,
//! `h*(kappa) = c_h / kappa`, clamped to a configured band.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{QualityReport, SurfaceMesh, Vec3};

/// Thresholds and knobs of the remesh gate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RemeshConfig {
    /// Remesh when the global shape quality drops below this.
    pub q_shape_min: f64,
    /// Remesh when the global size quality drops below this.
    pub q_size_min: f64,
    /// Sizing constant in `h* = c_h / kappa`.
    pub c_h: f64,
    /// Lower clamp of the sizing target.
    pub h_floor: f64,
    /// Upper clamp of the sizing target.
    pub h_ceil: f64,
    /// Maximum number of local-operation passes per remesh.
    pub max_passes: usize,
    pub enabled: bool,
}

impl Default for RemeshConfig {
    fn default() -> Self {
        Self {
            q_shape_min: 0.65,
            q_size_min: 0.55,
            c_h: 0.5,
            h_floor: 0.005,
            h_ceil: 0.5,
            max_passes: 25,
            enabled: true,
        }
    }
}

impl RemeshConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_shape_min > 0.0 && self.q_shape_min < 1.0)
            || !(self.q_size_min > 0.0 && self.q_size_min < 1.0)
        {
            return Err(Error::Parameter("quality thresholds must lie in (0,1)".into()));
        }
        if !(self.c_h > 0.0) {
            return Err(Error::Parameter("c_h must be positive".into()));
        }
        if !(self.h_floor > 0.0 && self.h_ceil > self.h_floor) {
            return Err(Error::Parameter("sizing clamps must satisfy 0 < floor < ceil".into()));
        }
        Ok(())
    }
}

/// Per-vertex sizing target, clamped to `[h_floor, h_ceil]`.
#[derive(Debug, Clone)]
pub struct SizingField {
    pub values: Vec<f64>,
}

impl SizingField {
    pub fn uniform(n_vertices: usize, h: f64) -> Self {
        Self {
            values: vec![h; n_vertices],
        }
    }

    /// Curvature-driven sizing from the nodal scalar curvature magnitudes.
    pub fn from_curvature(kappa_magnitude: &[f64], config: &RemeshConfig) -> Self {
        let values = kappa_magnitude
            .iter()
            .map(|&k| (config.c_h / k.max(1e-12)).clamp(config.h_floor, config.h_ceil))
            .collect();
        Self { values }
    }
}

/// True when the quality report calls for a remesh (strict drop below the
/// thresholds; equality does not trigger).
pub fn needs_remesh(report: &QualityReport, config: &RemeshConfig) -> bool {
    report.shape_min < config.q_shape_min || report.size_min < config.q_size_min
}

/// Mesh statistics recorded before and after a remesh.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeshStats {
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    pub q_shape: f64,
    pub q_size: f64,
    pub area: f64,
    pub volume: f64,
}

pub fn mesh_stats(mesh: &SurfaceMesh, h_star: &[f64]) -> Result<MeshStats> {
    let report = mesh.quality(h_star)?;
    Ok(MeshStats {
        vertices: mesh.n_vertices(),
        edges: mesh.n_edges(),
        triangles: mesh.n_triangles(),
        q_shape: report.shape_min,
        q_size: report.size_min,
        area: mesh.total_area(),
        volume: mesh.enclosed_volume(),
    })
}

// ---------------------------------------------------------------------------
// closest-point projection onto the pre-remesh surface

/// Uniform-grid spatial index over the triangles of a frozen surface,
/// answering closest-point queries and interpolating nodal fields.
pub struct SurfaceProjector {
    positions: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    cell: f64,
    origin: Vec3,
    dims: [i64; 3],
    grid: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl SurfaceProjector {
    pub fn new(mesh: &SurfaceMesh) -> Self {
        let positions = mesh.positions().to_vec();
        let triangles = mesh.triangles().to_vec();
        let mut lo = Vec3::from_element(f64::INFINITY);
        let mut hi = Vec3::from_element(f64::NEG_INFINITY);
        for p in &positions {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let mean_edge = {
            let mut sum = 0.0;
            for e in mesh.edges() {
                sum += (positions[e[0]] - positions[e[1]]).norm();
            }
            sum / mesh.n_edges() as f64
        };
        let cell = (2.0 * mean_edge).max(1e-9);
        let dims = [
            (((hi.x - lo.x) / cell).ceil() as i64 + 1).max(1),
            (((hi.y - lo.y) / cell).ceil() as i64 + 1).max(1),
            (((hi.z - lo.z) / cell).ceil() as i64 + 1).max(1),
        ];
        let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            let pa = positions[tri[0]];
            let pb = positions[tri[1]];
            let pc = positions[tri[2]];
            let tlo = pa.inf(&pb).inf(&pc);
            let thi = pa.sup(&pb).sup(&pc);
            let c0 = Self::cell_of(&tlo, &lo, cell);
            let c1 = Self::cell_of(&thi, &lo, cell);
            for x in c0.0..=c1.0 {
                for y in c0.1..=c1.1 {
                    for z in c0.2..=c1.2 {
                        grid.entry((x, y, z)).or_default().push(t as u32);
                    }
                }
            }
        }
        Self {
            positions,
            triangles,
            cell,
            origin: lo,
            dims,
            grid,
        }
    }

    fn cell_of(p: &Vec3, origin: &Vec3, cell: f64) -> (i64, i64, i64) {
        (
            ((p.x - origin.x) / cell).floor() as i64,
            ((p.y - origin.y) / cell).floor() as i64,
            ((p.z - origin.z) / cell).floor() as i64,
        )
    }

    /// Closest point on the surface: the point, the triangle index and the
    /// barycentric coordinates inside it.
    pub fn closest_point(&self, p: &Vec3) -> (Vec3, usize, [f64; 3]) {
        let center = Self::cell_of(p, &self.origin, self.cell);
        let mut best = (f64::INFINITY, Vec3::zeros(), 0usize, [0.0; 3]);
        let max_shell = self.dims.iter().max().copied().unwrap_or(1) + 1;
        for shell in 0..=max_shell {
            // lower bound on the distance to any cell in this shell
            if shell > 0 {
                let lower = (shell - 1) as f64 * self.cell;
                if best.0.sqrt() <= lower {
                    break;
                }
            }
            for (x, y, z) in shell_cells(center, shell) {
                if let Some(tris) = self.grid.get(&(x, y, z)) {
                    for &t in tris {
                        let tri = self.triangles[t as usize];
                        let (q, bary) = closest_point_triangle(
                            p,
                            &self.positions[tri[0]],
                            &self.positions[tri[1]],
                            &self.positions[tri[2]],
                        );
                        let d2 = (p - q).norm_squared();
                        if d2 < best.0 {
                            best = (d2, q, t as usize, bary);
                        }
                    }
                }
            }
        }
        (best.1, best.2, best.3)
    }

    /// Interpolate a nodal scalar field at a (triangle, barycentric) pair.
    pub fn interpolate(&self, tri: usize, bary: [f64; 3], field: &[f64]) -> f64 {
        let t = self.triangles[tri];
        bary[0] * field[t[0]] + bary[1] * field[t[1]] + bary[2] * field[t[2]]
    }
}

fn shell_cells(center: (i64, i64, i64), r: i64) -> Vec<(i64, i64, i64)> {
    let mut cells = Vec::new();
    if r == 0 {
        cells.push(center);
        return cells;
    }
    for x in -r..=r {
        for y in -r..=r {
            for z in -r..=r {
                if x.abs().max(y.abs()).max(z.abs()) == r {
                    cells.push((center.0 + x, center.1 + y, center.2 + z));
                }
            }
        }
    }
    cells
}

/// Closest point on a triangle to `p` (Ericson's region walk), with
/// barycentric coordinates of the result.
pub fn closest_point_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + v * ab, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + w * ac, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + w * (c - b), [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

// ---------------------------------------------------------------------------
// the working mesh mutated by the local operations

struct WorkMesh {
    positions: Vec<Vec3>,
    h_star: Vec<f64>,
    triangles: Vec<[usize; 3]>,
}

struct Adjacency {
    edges: Vec<[usize; 2]>,
    edge_tris: Vec<[usize; 2]>,
    neighbors: Vec<HashSet<usize>>,
    vertex_tris: Vec<Vec<usize>>,
}

impl WorkMesh {
    fn edge_target(&self, a: usize, b: usize) -> f64 {
        0.5 * (self.h_star[a] + self.h_star[b])
    }

    fn adjacency(&self) -> Adjacency {
        let n = self.positions.len();
        let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_tris: Vec<[usize; 2]> = Vec::new();
        let mut neighbors = vec![HashSet::new(); n];
        let mut vertex_tris = vec![Vec::new(); n];
        for (t, tri) in self.triangles.iter().enumerate() {
            for e in 0..3 {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                let key = (a.min(b), a.max(b));
                let idx = *edge_map.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_tris.push([usize::MAX, usize::MAX]);
                    edges.len() - 1
                });
                // slot 0 traverses lo -> hi
                let slot = if a < b { 0 } else { 1 };
                edge_tris[idx][slot] = t;
                neighbors[a].insert(b);
                neighbors[b].insert(a);
            }
            for &v in tri {
                vertex_tris[v].push(t);
            }
        }
        Adjacency {
            edges,
            edge_tris,
            neighbors,
            vertex_tris,
        }
    }

    fn triangle_quality(&self, tri: &[usize; 3]) -> f64 {
        shape_quality(
            &self.positions[tri[0]],
            &self.positions[tri[1]],
            &self.positions[tri[2]],
        )
    }

    fn triangle_normal(&self, tri: &[usize; 3]) -> Vec3 {
        (self.positions[tri[1]] - self.positions[tri[0]])
            .cross(&(self.positions[tri[2]] - self.positions[tri[0]]))
    }
}

fn shape_quality(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let area = 0.5 * (b - a).cross(&(c - a)).norm();
    let per = (b - a).norm() + (c - b).norm() + (a - c).norm();
    if per <= 0.0 {
        return 0.0;
    }
    12.0 * 3f64.sqrt() * area / (per * per)
}

// ---------------------------------------------------------------------------
// the remesh driver

/// Rebuild the surface to the sizing field. New vertices lie on the input
/// surface (closest-point projection); shape/size quality meet the
/// configured thresholds or the call fails with the best achieved report.
pub fn remesh(mesh: &SurfaceMesh, sizing: &SizingField, config: &RemeshConfig) -> Result<SurfaceMesh> {
    config.validate()?;
    if sizing.values.len() != mesh.n_vertices() {
        return Err(Error::Parameter(format!(
            "sizing field length {} does not match vertex count {}",
            sizing.values.len(),
            mesh.n_vertices()
        )));
    }
    if let Some(j) = sizing.values.iter().position(|&h| !(h > 0.0)) {
        return Err(Error::Parameter(format!("sizing must be positive (vertex {j})")));
    }

    let projector = SurfaceProjector::new(mesh);
    let area_before = mesh.total_area();
    let volume_before = mesh.enclosed_volume();
    let euler_before = mesh.euler_characteristic();

    let mut work = WorkMesh {
        positions: mesh.positions().to_vec(),
        h_star: sizing.values.clone(),
        triangles: mesh.triangles().to_vec(),
    };

    let mut best_report: Option<QualityReport> = None;
    for pass in 0..config.max_passes {
        split_pass(&mut work, &projector, &sizing.values);
        collapse_pass(&mut work, &projector, &sizing.values);
        flip_pass(&mut work);
        for _ in 0..2 {
            smooth_pass(&mut work, 0.5, &projector, &sizing.values);
        }

        let candidate = SurfaceMesh::new(work.positions.clone(), work.triangles.clone())?;
        let report = candidate.quality(&work.h_star)?;
        let met = report.shape_min >= config.q_shape_min && report.size_min >= config.q_size_min;
        let better = best_report
            .as_ref()
            .map(|b| report.shape_min.min(report.size_min) > b.shape_min.min(b.size_min))
            .unwrap_or(true);
        if better {
            best_report = Some(report.clone());
        }
        if met {
            let out = candidate.oriented_outward();
            let area_after = out.total_area();
            let volume_after = out.enclosed_volume();
            if (area_after - area_before).abs() > 0.005 * area_before
                || (volume_after - volume_before).abs() > 0.005 * volume_before.abs()
            {
                return Err(Error::RemeshFailure {
                    passes: pass + 1,
                    report,
                });
            }
            if out.euler_characteristic() != euler_before {
                return Err(Error::Topology(format!(
                    "remesh changed the Euler characteristic: {} -> {}",
                    euler_before,
                    out.euler_characteristic()
                )));
            }
            return Ok(out);
        }
    }
    Err(Error::RemeshFailure {
        passes: config.max_passes,
        report: best_report.expect("at least one pass ran"),
    })
}

fn project_with_target(
    projector: &SurfaceProjector,
    sizing: &[f64],
    p: &Vec3,
) -> (Vec3, f64) {
    let (q, tri, bary) = projector.closest_point(p);
    (q, projector.interpolate(tri, bary, sizing))
}

fn split_pass(work: &mut WorkMesh, projector: &SurfaceProjector, sizing: &[f64]) {
    let adj = work.adjacency();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    for e in &adj.edges {
        let [a, b] = *e;
        let len = (work.positions[a] - work.positions[b]).norm();
        if len > 4.0 / 3.0 * work.edge_target(a, b) {
            let mid = 0.5 * (work.positions[a] + work.positions[b]);
            let (q, h) = project_with_target(projector, sizing, &mid);
            work.positions.push(q);
            work.h_star.push(h);
            midpoint.insert((a, b), work.positions.len() - 1);
        }
    }
    if midpoint.is_empty() {
        return;
    }
    let mut out = Vec::with_capacity(work.triangles.len() + 2 * midpoint.len());
    for tri in &work.triangles {
        let mut v = *tri;
        let key = |a: usize, b: usize| (a.min(b), a.max(b));
        let mut m = [
            midpoint.get(&key(v[0], v[1])).copied(),
            midpoint.get(&key(v[1], v[2])).copied(),
            midpoint.get(&key(v[2], v[0])).copied(),
        ];
        let count = m.iter().filter(|x| x.is_some()).count();
        match count {
            0 => out.push(v),
            1 => {
                // rotate so the split edge is (v0, v1)
                while m[0].is_none() {
                    v.rotate_left(1);
                    m.rotate_left(1);
                }
                let mid = m[0].unwrap();
                out.push([v[0], mid, v[2]]);
                out.push([mid, v[1], v[2]]);
            }
            2 => {
                // rotate so the split edges are (v0,v1) and (v1,v2)
                while m[2].is_some() || m[0].is_none() {
                    v.rotate_left(1);
                    m.rotate_left(1);
                }
                let m0 = m[0].unwrap();
                let m1 = m[1].unwrap();
                out.push([v[0], m0, v[2]]);
                out.push([m0, m1, v[2]]);
                out.push([m0, v[1], m1]);
            }
            _ => {
                let m0 = m[0].unwrap();
                let m1 = m[1].unwrap();
                let m2 = m[2].unwrap();
                out.push([v[0], m0, m2]);
                out.push([m0, v[1], m1]);
                out.push([m2, m1, v[2]]);
                out.push([m0, m1, m2]);
            }
        }
    }
    work.triangles = out;
}

fn collapse_pass(work: &mut WorkMesh, projector: &SurfaceProjector, sizing: &[f64]) {
    let adj = work.adjacency();
    let n = work.positions.len();
    let mut locked = vec![false; n];
    let mut removed = vec![false; work.triangles.len()];
    let mut collapsed_any = false;

    for (e, &[a, b]) in adj.edges.iter().enumerate() {
        if locked[a] || locked[b] {
            continue;
        }
        let len = (work.positions[a] - work.positions[b]).norm();
        let target = work.edge_target(a, b);
        if len >= 0.8 * target {
            continue;
        }
        let [t1, t2] = adj.edge_tris[e];
        if removed[t1] || removed[t2] {
            continue;
        }
        let opposite = |t: usize| -> usize {
            *work.triangles[t].iter().find(|&&v| v != a && v != b).unwrap()
        };
        let (c, d) = (opposite(t1), opposite(t2));
        if c == d {
            continue;
        }
        // link condition: a and b may share only the two opposite vertices
        let common = adj.neighbors[a]
            .iter()
            .filter(|v| adj.neighbors[b].contains(*v))
            .count();
        if common != 2 {
            continue;
        }

        let mid = 0.5 * (work.positions[a] + work.positions[b]);
        let (new_pos, new_h) = project_with_target(projector, sizing, &mid);

        // simulate: every surviving triangle of a or b, with b renamed to a
        // and a moved, must stay well-shaped, keep its orientation and not
        // create over-long edges
        let mut ok = true;
        let mut affected: Vec<usize> = Vec::new();
        for &t in adj.vertex_tris[a].iter().chain(&adj.vertex_tris[b]) {
            if t == t1 || t == t2 || removed[t] || affected.contains(&t) {
                continue;
            }
            affected.push(t);
            let tri = work.triangles[t];
            let old_normal = work.triangle_normal(&tri);
            let pos_of = |v: usize| -> Vec3 {
                if v == a || v == b {
                    new_pos
                } else {
                    work.positions[v]
                }
            };
            let (pa, pb, pc) = (pos_of(tri[0]), pos_of(tri[1]), pos_of(tri[2]));
            let new_normal = (pb - pa).cross(&(pc - pa));
            if new_normal.dot(&old_normal) <= 0.0 || shape_quality(&pa, &pb, &pc) < 0.05 {
                ok = false;
                break;
            }
            let max_edge = (pb - pa).norm().max((pc - pb).norm()).max((pa - pc).norm());
            if max_edge > 4.0 / 3.0 * new_h.max(work.edge_target(tri[0], tri[1])) {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }

        work.positions[a] = new_pos;
        work.h_star[a] = new_h;
        removed[t1] = true;
        removed[t2] = true;
        for &t in &affected {
            for v in work.triangles[t].iter_mut() {
                if *v == b {
                    *v = a;
                }
            }
        }
        collapsed_any = true;
        // freeze the entire neighborhood for the rest of this pass
        locked[a] = true;
        locked[b] = true;
        for &v in adj.neighbors[a].iter().chain(&adj.neighbors[b]) {
            locked[v] = true;
        }
    }

    if collapsed_any {
        compact(work, &removed);
    }
}

/// Drop removed triangles and unreferenced vertices, remapping indices.
fn compact(work: &mut WorkMesh, removed: &[bool]) {
    let triangles: Vec<[usize; 3]> = work
        .triangles
        .iter()
        .zip(removed)
        .filter(|(_, r)| !**r)
        .map(|(t, _)| *t)
        .collect();
    let mut remap = vec![usize::MAX; work.positions.len()];
    let mut positions = Vec::new();
    let mut h_star = Vec::new();
    let mut out = Vec::with_capacity(triangles.len());
    for tri in &triangles {
        let mut mapped = [0usize; 3];
        for (slot, &v) in tri.iter().enumerate() {
            if remap[v] == usize::MAX {
                remap[v] = positions.len();
                positions.push(work.positions[v]);
                h_star.push(work.h_star[v]);
            }
            mapped[slot] = remap[v];
        }
        out.push(mapped);
    }
    work.positions = positions;
    work.h_star = h_star;
    work.triangles = out;
}

fn flip_pass(work: &mut WorkMesh) {
    let adj = work.adjacency();
    let mut locked = vec![false; work.positions.len()];
    let mut edge_set: HashSet<(usize, usize)> = adj.edges.iter().map(|e| (e[0], e[1])).collect();

    for (e, &[a, b]) in adj.edges.iter().enumerate() {
        if locked[a] || locked[b] {
            continue;
        }
        let [t1, t2] = adj.edge_tris[e];
        let opposite = |t: usize| -> usize {
            *work.triangles[t].iter().find(|&&v| v != a && v != b).unwrap()
        };
        let (c, d) = (opposite(t1), opposite(t2));
        if c == d || locked[c] || locked[d] {
            continue;
        }
        if edge_set.contains(&(c.min(d), c.max(d))) {
            continue;
        }
        // t1 traverses a -> b (slot 0 of the canonical edge), t2 the reverse
        let q_old = work.triangle_quality(&work.triangles[t1]).min(work.triangle_quality(&work.triangles[t2]));
        let new1 = [a, d, c];
        let new2 = [d, b, c];
        let q_new = work.triangle_quality(&new1).min(work.triangle_quality(&new2));
        if q_new <= q_old + 1e-12 {
            continue;
        }
        let old_normal = work.triangle_normal(&work.triangles[t1]) + work.triangle_normal(&work.triangles[t2]);
        if work.triangle_normal(&new1).dot(&old_normal) <= 0.0
            || work.triangle_normal(&new2).dot(&old_normal) <= 0.0
        {
            continue;
        }
        work.triangles[t1] = new1;
        work.triangles[t2] = new2;
        edge_set.remove(&(a.min(b), a.max(b)));
        edge_set.insert((c.min(d), c.max(d)));
        for v in [a, b, c, d] {
            locked[v] = true;
        }
    }
}

fn smooth_pass(work: &mut WorkMesh, lambda: f64, projector: &SurfaceProjector, sizing: &[f64]) {
    let adj = work.adjacency();
    let n = work.positions.len();
    // area-weighted vertex normals of the current mesh
    let mut normals = vec![Vec3::zeros(); n];
    for tri in &work.triangles {
        let an = work.triangle_normal(tri);
        for &v in tri {
            normals[v] += an;
        }
    }
    let mut moved = work.positions.clone();
    for v in 0..n {
        if adj.neighbors[v].is_empty() {
            continue;
        }
        let mut centroid = Vec3::zeros();
        for &u in &adj.neighbors[v] {
            centroid += work.positions[u];
        }
        centroid /= adj.neighbors[v].len() as f64;
        let pull = centroid - work.positions[v];
        let nrm = normals[v].norm();
        let tangential = if nrm > 0.0 {
            let unit = normals[v] / nrm;
            pull - unit * pull.dot(&unit)
        } else {
            pull
        };
        moved[v] = work.positions[v] + lambda * tangential;
    }
    for v in 0..n {
        let (q, h) = project_with_target(projector, sizing, &moved[v]);
        work.positions[v] = q;
        work.h_star[v] = h;
    }
}
