use std::time::Instant;

use faer::prelude::*;
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuSymbolicParams, NumericLu};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMat, Triplet};
use faer::dyn_stack::{MemBuffer, MemStack};
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
    let a: &SparseColMat<usize, f64> = &system.matrix;
    println!("dim {} nnz {}", system.rhs.len(), a.compute_nnz());

    for (name, thresh) in [
        ("auto", SupernodalThreshold::AUTO),
        ("supernodal", SupernodalThreshold::FORCE_SUPERNODAL),
        ("simplicial", SupernodalThreshold::FORCE_SIMPLICIAL),
    ] {
        let t0 = Instant::now();
        let symbolic = factorize_symbolic_lu(a.symbolic(), LuSymbolicParams {
            supernodal_flop_ratio_threshold: thresh,
            ..Default::default()
        }).unwrap();
        let sym_t = t0.elapsed();
        let par = faer::get_global_parallelism();
        let mut numeric = NumericLu::<usize, f64>::new();
        let t0 = Instant::now();
        symbolic.factorize_numeric_lu::<f64>(
            &mut numeric, a.rb(), par,
            MemStack::new(&mut MemBuffer::new(
                symbolic.factorize_numeric_lu_scratch::<f64>(par, Default::default()),
            )),
            Default::default(),
        ).unwrap();
        println!("{name}: symbolic {:.1?} numeric {:.1?}", sym_t, t0.elapsed());
    }

    // parallel numeric
    faer::set_global_parallelism(faer::Par::rayon(0));
    let t0 = Instant::now();
    let _lu = a.sp_lu().unwrap();
    println!("sp_lu rayon(all): {:.1?}", t0.elapsed());
    faer::set_global_parallelism(faer::Par::Seq);
}
