use vesicle::mesh::Vec3;
use vesicle::shapes;
use vesicle::solver::MassSolver;
use vesicle::surfcalc::{self, build_element_operators};

fn main() {
    let mut prev: Option<f64> = None;
    for freq in [4usize, 8, 16, 32] {
        let mesh = shapes::icosphere(freq);
        let ops = build_element_operators(&mesh).unwrap();
        let mass = MassSolver::new(&mesh, &ops).unwrap();
        // geometric rhs: area gradient per vertex
        let n = mesh.n_vertices();
        let mut b = vec![Vec3::zeros(); n];
        for (k, tri) in mesh.triangles().iter().enumerate() {
            for (l, &v) in tri.iter().enumerate() {
                b[v] += ops[k].area * ops[k].shape_gradients[l];
            }
        }
        let mut kappa = vec![Vec3::zeros(); n];
        for c in 0..3 {
            let bc: Vec<f64> = b.iter().map(|v| v[c]).collect();
            let xc = mass.solve(&bc);
            for j in 0..n { kappa[j][c] = xc[j]; }
        }
        let diff: Vec<Vec3> = mesh.positions().iter().zip(&kappa)
            .map(|(p, k)| k - 2.0 * p.normalize()).collect();
        let err = surfcalc::l2_norm_vector(&mesh, &ops, &diff);
        let rate = prev.map(|p: f64| (p / err).log2()).unwrap_or(0.0);
        println!("freq {freq:3} h={:.4} err={err:.6e} rate={rate:.3}", mesh.max_edge_length());
        prev = Some(err);
    }
}
