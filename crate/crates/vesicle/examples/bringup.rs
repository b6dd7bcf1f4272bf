use vesicle::assembly::ModelParams;
use vesicle::mesh::Vec3;
use vesicle::remesh::RemeshConfig;
use vesicle::shapes;
use vesicle::stepper::{run_scenario, DtMode, NullSink, RunSettings, SimState};
use vesicle::surfcalc::{self, build_element_operators};

fn kappa_l2_error(state: &SimState) -> f64 {
    // relaxed sphere: compare against the exact curvature of the sphere of
    // equal enclosed volume
    let mesh = &state.mesh;
    let ops = build_element_operators(mesh).unwrap();
    let vol = mesh.enclosed_volume();
    let r = (3.0 * vol / (4.0 * std::f64::consts::PI)).powf(1.0 / 3.0);
    let center = {
        let mut c = Vec3::zeros();
        let lumped = mesh.lumped_vertex_areas();
        let total: f64 = lumped.iter().sum();
        for (p, a) in mesh.positions().iter().zip(&lumped) {
            c += *a * p;
        }
        c / total
    };
    let fields = state.last_fields.as_ref().unwrap();
    let diff: Vec<Vec3> = mesh
        .positions()
        .iter()
        .zip(&fields.curvature)
        .map(|(p, kappa)| {
            let n = (p - center).normalize();
            kappa - 2.0 / r * n
        })
        .collect();
    surfcalc::l2_norm_vector(mesh, &ops, &diff)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("sphere");
    let params = ModelParams::default();

    match which {
        // criterion 2 probe: k=10 sphere, 200 steps
        "sphere" => {
            let mesh = shapes::icosphere(10);
            println!(
                "sphere k=10: {} vertices, {} elements, h_min {:.4}",
                mesh.n_vertices(),
                mesh.n_triangles(),
                mesh.min_edge_length()
            );
            let mut state = SimState::new(mesh);
            let settings = RunSettings {
                t_end: f64::INFINITY,
                max_steps: 200,
                remesh: RemeshConfig { enabled: false, ..Default::default() },
                ..Default::default()
            };
            let summary = run_scenario(&mut state, &params, &settings, &mut NullSink).unwrap();
            let e_exact = 8.0 * std::f64::consts::PI;
            for (i, d) in summary.diagnostics.iter().enumerate() {
                if i % 20 == 0 || i + 1 == summary.diagnostics.len() {
                    println!(
                        "  n={:4} t={:.5e} |u|={:.4e} E={:.6} dE/8pi={:+.4e} p={:+.4e} v={:.6}",
                        d.n, d.t, d.velocity_norm, d.energy,
                        (d.energy - e_exact) / e_exact, d.internal_pressure, d.reduced_volume
                    );
                }
            }
        }
        // criterion 1 probe: relaxed-sphere curvature EOC
        "eoc" => {
            for freq in [8usize, 16, 32] {
                let mesh = shapes::icosphere(freq);
                let mut state = SimState::new(mesh);
                let settings = RunSettings {
                    t_end: f64::INFINITY,
                    max_steps: 60,
                    remesh: RemeshConfig { enabled: false, ..Default::default() },
                    ..Default::default()
                };
                run_scenario(&mut state, &params, &settings, &mut NullSink).unwrap();
                let err = kappa_l2_error(&state);
                println!("freq {freq:3} relaxed kappa L2 err = {err:.6e}");
            }
        }
        // criterion 4 probe
        "stability" => {
            for freq in [8usize, 16] {
                let mesh = shapes::icosphere(freq);
                let h = mesh.min_edge_length();
                let t0 = std::time::Instant::now();
                let dt_lim = vesicle::stepper::stability_search(&mesh, &params).unwrap();
                println!(
                    "freq {freq:3} h_min={h:.4} dt_lim={dt_lim:.4e} coeff={:.3} ({:.1?})",
                    dt_lim / (h * h),
                    t0.elapsed()
                );
            }
        }
        // criterion 3 probe: oblate equilibria
        "oblate" => {
            let v_target: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.6104);
            let t_end: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.25);
            let mesh = shapes::oblate_with_reduced_volume(8, v_target).unwrap();
            println!(
                "oblate v={v_target}: {} vertices, {} elements, h_min {:.4}",
                mesh.n_vertices(),
                mesh.n_triangles(),
                mesh.min_edge_length()
            );
            let mut state = SimState::new(mesh);
            let settings = RunSettings {
                t_end,
                max_steps: u64::MAX,
                remesh: RemeshConfig {
                    // shape gate only: generous sizing keeps the size gate off
                    c_h: 50.0,
                    h_ceil: 10.0,
                    ..Default::default()
                },
                ..Default::default()
            };
            let t0 = std::time::Instant::now();
            let summary = run_scenario(&mut state, &params, &settings, &mut NullSink).unwrap();
            println!("steps: {} remeshes: {} ({:.1?})", summary.steps, summary.remesh_events.len(), t0.elapsed());
            for (i, d) in summary.diagnostics.iter().enumerate() {
                if i % 200 == 0 || i + 1 == summary.diagnostics.len() {
                    println!(
                        "  n={:5} t={:.4e} |u|={:.4e} E={:.5} p={:+.5} v={:.5} Qs={:.3}",
                        d.n, d.t, d.velocity_norm, d.energy, d.internal_pressure,
                        d.reduced_volume, d.q_shape
                    );
                }
            }
        }
        _ => eprintln!("unknown probe {which}"),
    }
}
