use std::time::Instant;
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use vesicle::assembly::{self, ExternalLoad, ModelParams, SystemInputs};
use vesicle::mesh::Vec3;
use vesicle::shapes;
use vesicle::surfcalc::build_element_operators;

fn main() {
    let freq: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let mesh = shapes::icosphere(freq);
    let n = mesh.n_vertices();
    let params = ModelParams::default();
    let ops = build_element_operators(&mesh).unwrap();
    let g = vec![Vec3::zeros(); n];
    let load = ExternalLoad::default();
    let system = assembly::assemble_system(&mesh, &ops, &SystemInputs {
        params: &params, dt: 1e-4, g_h: &g,
        area_target: mesh.total_area(), volume_target: mesh.enclosed_volume(), load: &load,
    }).unwrap();
    let a = &system.matrix;
    let dim = system.rhs.len();

    // symmetrized pattern with SPD values: |A| + |A^T| + shift I
    let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::new();
    let sym = a.symbolic();
    for j in 0..dim {
        for (i, v) in sym.row_idx_of_col(j).zip(a.val_of_col(j)) {
            trips.push(Triplet::new(i, j, v.abs()));
            trips.push(Triplet::new(j, i, v.abs()));
        }
        trips.push(Triplet::new(j, j, 1e3));
    }
    let spd = SparseColMat::try_new_from_triplets(dim, dim, &trips).unwrap();
    let t0 = Instant::now();
    let llt = spd.sp_cholesky(faer::Side::Lower).unwrap();
    println!("llt on symmetrized pattern, dim {dim}: {:.1?}", t0.elapsed());
    let rhs = Mat::from_fn(dim, 1, |_, _| 1.0);
    let t0 = Instant::now();
    let _x = llt.solve(&rhs);
    println!("  triangular solve: {:.1?}", t0.elapsed());
}
