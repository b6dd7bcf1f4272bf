use std::time::Instant;

use vesicle::assembly::{self, ExternalLoad, ModelParams, SystemInputs};
use vesicle::mesh::Vec3;
use vesicle::shapes;
use vesicle::solver;
use vesicle::surfcalc::build_element_operators;

fn main() {
    let freq: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10);
    let mesh = shapes::icosphere(freq);
    let n = mesh.n_vertices();
    println!("freq {freq}: {} vertices, dim {}", n, 7 * n + 7);
    let params = ModelParams::default();
    let g = vec![Vec3::zeros(); n];
    let load = ExternalLoad::default();

    let t0 = Instant::now();
    let ops = build_element_operators(&mesh).unwrap();
    println!("operators: {:.1?}", t0.elapsed());

    let t0 = Instant::now();
    let system = assembly::assemble_system(
        &mesh,
        &ops,
        &SystemInputs {
            params: &params,
            dt: 1e-4,
            g_h: &g,
            area_target: mesh.total_area(),
            volume_target: mesh.enclosed_volume(),
            load: &load,
        },
    )
    .unwrap();
    println!(
        "assemble: {:.1?} (nnz {})",
        t0.elapsed(),
        system.matrix.compute_nnz()
    );

    let t0 = Instant::now();
    let x = solver::solve_system(&system).unwrap();
    println!("lu+solve: {:.1?}", t0.elapsed());
    let _ = x;

    let t0 = Instant::now();
    let mass = solver::MassSolver::new(&mesh, &ops).unwrap();
    println!("mass chol: {:.1?}", t0.elapsed());
    let pi = vec![0.5; n];
    let t0 = Instant::now();
    let _ = solver::project_pressure_gradient(&mesh, &ops, &mass, &pi);
    println!("projection: {:.1?}", t0.elapsed());
}
