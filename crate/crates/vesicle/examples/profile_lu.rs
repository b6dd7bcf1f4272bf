use std::time::Instant;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use vesicle::assembly::{self, layout, ModelParams};
use vesicle::shapes;
use vesicle::surfcalc::build_element_operators;

fn main() {
    let freq: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10);
    let mesh = shapes::icosphere(freq);
    let n = mesh.n_vertices();
    let params = ModelParams::default();
    let ops = build_element_operators(&mesh).unwrap();
    let dt = 1e-4;

    // sparse core: u, pi, kappa blocks only (dim 7N)
    let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::new();
    for (r, c, v) in assembly::assemble_viscous(&mesh, &ops, params.mu) {
        trips.push(Triplet::new(r, c, v));
    }
    let pi0 = layout::pressure(n, 0);
    let kappa0 = layout::curvature(n, 0, 0);
    for (r, c, v) in assembly::assemble_inextensibility(&mesh, &ops) {
        trips.push(Triplet::new(pi0 + r, c, v));
        trips.push(Triplet::new(c, pi0 + r, v));
    }
    let g = vec![vesicle::mesh::Vec3::zeros(); n];
    let (pgp, _) = assembly::assemble_pgp(&mesh, &ops, params.mu, params.gamma_factor, &g);
    for (r, c, v) in pgp {
        trips.push(Triplet::new(pi0 + r, pi0 + c, -v));
    }
    let (elastic, _) = assembly::assemble_elastic_coupling(&mesh, &ops, params.bending_modulus);
    for (r, c, v) in elastic {
        trips.push(Triplet::new(r, kappa0 + c, v));
    }
    let ident = assembly::assemble_curvature_identity(&mesh, &ops, dt);
    for (r, c, v) in ident.velocity_coupling {
        trips.push(Triplet::new(kappa0 + r, c, v));
    }
    for (r, c, v) in ident.mass {
        trips.push(Triplet::new(kappa0 + r, kappa0 + c, v));
    }
    let dim = 7 * n;
    let core = SparseColMat::try_new_from_triplets(dim, dim, &trips).unwrap();
    let t0 = Instant::now();
    let lu = core.sp_lu().unwrap();
    println!("core dim {dim}: lu {:.1?}", t0.elapsed());
    let rhs = Mat::from_fn(dim, 1, |_, _| 1.0);
    let t0 = Instant::now();
    let _x = lu.solve(&rhs);
    println!("  triangular solve: {:.1?}", t0.elapsed());

    // same matrix, interleaved per-vertex dof ordering
    let perm = |dof: usize| -> usize {
        if dof < 3 * n {
            let j = dof / 3;
            7 * j + dof % 3
        } else if dof < 4 * n {
            let j = dof - 3 * n;
            7 * j + 3
        } else {
            let r = dof - 4 * n;
            let j = r / 3;
            7 * j + 4 + r % 3
        }
    };
    let itrips: Vec<Triplet<usize, usize, f64>> = trips
        .iter()
        .map(|t| Triplet::new(perm(t.row), perm(t.col), t.val))
        .collect();
    let inter = SparseColMat::try_new_from_triplets(dim, dim, &itrips).unwrap();
    let t0 = Instant::now();
    let lu2 = inter.sp_lu().unwrap();
    println!("interleaved lu: {:.1?}", t0.elapsed());
    let t0 = Instant::now();
    let _x2 = lu2.solve(&rhs);
    println!("  triangular solve: {:.1?}", t0.elapsed());
}

// appended experiment: interleaved dof ordering
#[allow(dead_code)]
fn interleave_test() {}
