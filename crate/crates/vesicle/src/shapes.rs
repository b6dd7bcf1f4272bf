//! Initial shape generators: geodesic icospheres, ellipsoids and oblates
//! of prescribed reduced volume.

use std::collections::HashMap;

use crate::error::Result;
use crate::mesh::{SurfaceMesh, Vec3};

/// Icosahedron with unit circumradius, faces oriented outward.
fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let verts = vec![
        Vec3::new(-1.0, t, 0.0),
        Vec3::new(1.0, t, 0.0),
        Vec3::new(-1.0, -t, 0.0),
        Vec3::new(1.0, -t, 0.0),
        Vec3::new(0.0, -1.0, t),
        Vec3::new(0.0, 1.0, t),
        Vec3::new(0.0, -1.0, -t),
        Vec3::new(0.0, 1.0, -t),
        Vec3::new(t, 0.0, -1.0),
        Vec3::new(t, 0.0, 1.0),
        Vec3::new(-t, 0.0, -1.0),
        Vec3::new(-t, 0.0, 1.0),
    ]
    .into_iter()
    .map(|v| v.normalize())
    .collect();
    let faces = vec![
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
    (verts, faces)
}

/// Geodesic sphere of unit radius: each icosahedron face is subdivided into
/// `frequency^2` triangles and the lattice is projected onto the sphere.
/// Vertex/element counts are `10 f^2 + 2` and `20 f^2`.
pub fn icosphere(frequency: usize) -> SurfaceMesh {
    let k = frequency.max(1);
    let (ico_verts, ico_faces) = icosahedron();

    // Lattice points are welded across faces through an exact integer key:
    // the sorted (vertex, barycentric weight) pairs with positive weight.
    let mut key_to_index: HashMap<[(usize, u32); 3], usize> = HashMap::new();
    let mut positions: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    for &[a, b, c] in &ico_faces {
        let mut grid = vec![vec![usize::MAX; k + 1]; k + 1];
        for i in 0..=k {
            for j in 0..=(k - i) {
                let weights = [(a, (k - i - j) as u32), (b, i as u32), (c, j as u32)];
                let mut key = [(usize::MAX, 0u32); 3];
                let mut slot = 0;
                for w in weights.iter().filter(|w| w.1 > 0) {
                    key[slot] = *w;
                    slot += 1;
                }
                key[..slot].sort_unstable();
                let index = *key_to_index.entry(key).or_insert_with(|| {
                    let p = (ico_verts[a] * (k - i - j) as f64
                        + ico_verts[b] * i as f64
                        + ico_verts[c] * j as f64)
                        / k as f64;
                    positions.push(p.normalize());
                    positions.len() - 1
                });
                grid[i][j] = index;
            }
        }
        for i in 0..k {
            for j in 0..(k - i) {
                triangles.push([grid[i][j], grid[i + 1][j], grid[i][j + 1]]);
                if j + 1 < k - i {
                    triangles.push([grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]]);
                }
            }
        }
    }
    SurfaceMesh::new(positions, triangles).expect("icosphere is a valid closed mesh")
}

/// Icosphere mapped onto the ellipsoid with semi-axes (a, b, c).
pub fn ellipsoid(frequency: usize, a: f64, b: f64, c: f64) -> SurfaceMesh {
    let sphere = icosphere(frequency);
    sphere.with_positions(
        sphere
            .positions()
            .iter()
            .map(|p| Vec3::new(a * p.x, b * p.y, c * p.z))
            .collect(),
    )
}

/// Flattened ellipsoid (semi-axes 1,1,s) whose discrete reduced volume
/// matches `v_target`, rescaled to total area `4 pi`. The flattening factor
/// is found by bisection on the mesh itself.
pub fn oblate_with_reduced_volume(frequency: usize, v_target: f64) -> Result<SurfaceMesh> {
    if !(0.0 < v_target && v_target <= 1.0) {
        return Err(crate::error::Error::Parameter(format!(
            "reduced volume target must lie in (0, 1], got {v_target}"
        )));
    }
    let sphere = icosphere(frequency);
    let v_of = |s: f64| -> f64 {
        sphere
            .with_positions(
                sphere
                    .positions()
                    .iter()
                    .map(|p| Vec3::new(p.x, p.y, s * p.z))
                    .collect(),
            )
            .reduced_volume()
    };
    let (mut lo, mut hi) = (0.02, 1.0);
    if v_target >= v_of(hi) {
        return Ok(sphere.normalize_area());
    }
    if v_target <= v_of(lo) {
        return Err(crate::error::Error::Parameter(format!(
            "reduced volume target {v_target} below the reachable flattening range"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if v_of(mid) < v_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let s = 0.5 * (lo + hi);
    Ok(sphere
        .with_positions(
            sphere
                .positions()
                .iter()
                .map(|p| Vec3::new(p.x, p.y, s * p.z))
                .collect(),
        )
        .normalize_area())
}

/// Axis-aligned unit cube surface (12 triangles), a handy exact fixture.
pub fn unit_cube() -> SurfaceMesh {
    let positions = vec![
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(1.0, 1.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(1.0, 0.0, 1.0),
        Vec3::new(1.0, 1.0, 1.0),
        Vec3::new(0.0, 1.0, 1.0),
    ];
    let triangles = vec![
        [0, 3, 2],
        [0, 2, 1],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [2, 3, 7],
        [2, 7, 6],
        [0, 4, 7],
        [0, 7, 3],
        [1, 2, 6],
        [1, 6, 5],
    ];
    SurfaceMesh::new(positions, triangles).expect("cube is a valid closed mesh")
}
