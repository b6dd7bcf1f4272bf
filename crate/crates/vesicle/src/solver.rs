//! Sparse direct solves: LU for the saddle-point system, Cholesky for
//! consistent-mass projections, and field extraction.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::assembly::{layout, SaddleSystem};
use crate::error::{Error, Result};
use crate::mesh::{SurfaceMesh, Vec3};
use crate::surfcalc::{self, ElementOperator, ScalarField, VectorField};

/// Select sequential (bit-reproducible, the default) or rayon-backed
/// parallel execution inside the factorizations.
pub fn configure_threads(threads: usize, deterministic: bool) {
    if deterministic || threads <= 1 {
        faer::set_global_parallelism(faer::Par::Seq);
    } else {
        faer::set_global_parallelism(faer::Par::rayon(threads));
    }
}

/// Solution fields of one saddle-point solve, in physical sign conventions
/// (`surface_pressure` is the multiplier of the inextensibility constraint
/// as it appears in the continuous momentum balance).
#[derive(Debug, Clone)]
pub struct SolvedFields {
    pub velocity: VectorField,
    pub surface_pressure: ScalarField,
    pub curvature: VectorField,
    pub internal_pressure: f64,
    pub rigid_multipliers: [f64; 6],
}

/// Factor and solve the assembled system by sparse LU.
pub fn solve_system(system: &SaddleSystem) -> Result<Vec<f64>> {
    let dim = system.rhs.len();
    let lu = system
        .matrix
        .sp_lu()
        .map_err(|e| Error::SingularSystem(format!("LU factorization failed: {e:?}")))?;
    let rhs = Mat::from_fn(dim, 1, |i, _| system.rhs[i]);
    let x = lu.solve(&rhs);
    let out: Vec<f64> = (0..dim).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Instability("non-finite solution component".into()));
    }
    Ok(out)
}

/// Split the raw solution vector into nodal fields. The assembled pressure
/// multiplier carries the opposite sign of the physical surface pressure
/// and is flipped here.
pub fn extract_fields(x: &[f64], n: usize) -> SolvedFields {
    let mut velocity = Vec::with_capacity(n);
    let mut curvature = Vec::with_capacity(n);
    let mut surface_pressure = Vec::with_capacity(n);
    for j in 0..n {
        velocity.push(Vec3::new(
            x[layout::velocity(j, 0)],
            x[layout::velocity(j, 1)],
            x[layout::velocity(j, 2)],
        ));
        curvature.push(Vec3::new(
            x[layout::curvature(n, j, 0)],
            x[layout::curvature(n, j, 1)],
            x[layout::curvature(n, j, 2)],
        ));
        surface_pressure.push(-x[layout::pressure(n, j)]);
    }
    let mut rigid = [0.0; 6];
    for (i, r) in rigid.iter_mut().enumerate() {
        *r = x[layout::rigid(n, i)];
    }
    SolvedFields {
        velocity,
        surface_pressure,
        curvature,
        internal_pressure: x[layout::internal_pressure(n)],
        rigid_multipliers: rigid,
    }
}

/// Cholesky factorization of the consistent scalar mass matrix, reused for
/// the three components of every L2 projection on a given surface.
pub struct MassSolver {
    n: usize,
    factor: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl MassSolver {
    pub fn new(mesh: &SurfaceMesh, ops: &[ElementOperator]) -> Result<Self> {
        let n = mesh.n_vertices();
        let trips: Vec<Triplet<usize, usize, f64>> = surfcalc::mass_triplets(mesh, ops)
            .into_iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let matrix = SparseColMat::try_new_from_triplets(n, n, &trips)
            .map_err(|e| Error::SingularSystem(format!("mass assembly failed: {e:?}")))?;
        let factor = matrix
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| Error::SingularSystem(format!("mass Cholesky failed: {e:?}")))?;
        Ok(Self { n, factor })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.factor.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

/// L2 projection of the surface-pressure gradient onto the P1 vector space:
/// solve `int g . v = int grad_G pi . v` for all P1 v. Returns the nodal
/// field and the worst relative residual over the three components.
pub fn project_pressure_gradient(
    mesh: &SurfaceMesh,
    ops: &[ElementOperator],
    mass: &MassSolver,
    pi: &[f64],
) -> (VectorField, f64) {
    let n = mesh.n_vertices();
    let grad = surfcalc::scalar_gradient(mesh, ops, pi);
    let mut b = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let w = ops[k].area / 3.0;
        for &v in tri {
            for c in 0..3 {
                b[c][v] += w * grad[k][c];
            }
        }
    }
    let mut g = vec![Vec3::zeros(); n];
    let mut residual: f64 = 0.0;
    for c in 0..3 {
        let x = mass.solve(&b[c]);
        let mx = surfcalc::mass_apply_scalar(mesh, ops, &x);
        let b_norm = b[c].iter().map(|v| v * v).sum::<f64>().sqrt();
        let r_norm = mx
            .iter()
            .zip(&b[c])
            .map(|(a, bb)| (a - bb) * (a - bb))
            .sum::<f64>()
            .sqrt();
        residual = residual.max(r_norm / b_norm.max(1e-300));
        for j in 0..n {
            g[j][c] = x[j];
        }
    }
    (g, residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_system, ExternalLoad, ModelParams, SystemInputs};
    use crate::shapes;
    use crate::surfcalc::build_element_operators;

    fn solve_on(mesh: &SurfaceMesh) -> SolvedFields {
        let ops = build_element_operators(mesh).unwrap();
        let params = ModelParams::default();
        let dt = 0.105 * mesh.min_edge_length().powi(2);
        let load = ExternalLoad::default();
        let g = vec![Vec3::zeros(); mesh.n_vertices()];
        let system = assemble_system(
            mesh,
            &ops,
            &SystemInputs {
                params: &params,
                dt,
                g_h: &g,
                area_target: mesh.total_area(),
                volume_target: mesh.enclosed_volume(),
                load: &load,
            },
        )
        .unwrap();
        let x = solve_system(&system).unwrap();
        extract_fields(&x, mesh.n_vertices())
    }

    #[test]
    fn full_system_solvable_on_spheres_and_oblates() {
        // three refinements each; factorization must succeed and the
        // rigid-mode integrals of the solution must vanish
        for mesh in [
            shapes::icosphere(2),
            shapes::icosphere(3),
            shapes::icosphere(4),
            shapes::oblate_with_reduced_volume(2, 0.61).unwrap(),
            shapes::oblate_with_reduced_volume(3, 0.61).unwrap(),
            shapes::oblate_with_reduced_volume(4, 0.61).unwrap(),
            shapes::oblate_with_reduced_volume(3, 0.81).unwrap(),
        ] {
            let fields = solve_on(&mesh);
            let ops = build_element_operators(&mesh).unwrap();
            let ones = vec![1.0; mesh.n_vertices()];
            for c in 0..3 {
                let comp: Vec<f64> = fields.velocity.iter().map(|u| u[c]).collect();
                let integral = surfcalc::mass_inner_scalar(&mesh, &ops, &comp, &ones);
                assert!(integral.abs() < 1e-8, "net translation {integral}");
            }
            let moment: Vec<Vec3> = mesh
                .positions()
                .iter()
                .zip(&fields.velocity)
                .map(|(x, u)| x.cross(u))
                .collect();
            for c in 0..3 {
                let comp: Vec<f64> = moment.iter().map(|m| m[c]).collect();
                let integral = surfcalc::mass_inner_scalar(&mesh, &ops, &comp, &ones);
                assert!(integral.abs() < 1e-8, "net rotation {integral}");
            }
        }
    }

    #[test]
    fn sphere_curvature_field_is_twice_the_normal() {
        // L2(surface) error of the solved curvature against the exact 2n;
        // pointwise accuracy degrades at the twelve irregular vertices, so
        // the max norm is not the right measure
        let l2_err = |freq: usize| -> f64 {
            let mesh = shapes::icosphere(freq);
            let ops = build_element_operators(&mesh).unwrap();
            let fields = solve_on(&mesh);
            let diff: Vec<Vec3> = mesh
                .positions()
                .iter()
                .zip(&fields.curvature)
                .map(|(p, kappa)| kappa - 2.0 * p.normalize())
                .collect();
            surfcalc::l2_norm_vector(&mesh, &ops, &diff)
        };
        let coarse = l2_err(4);
        let fine = l2_err(8);
        eprintln!("kappa L2 errors: {coarse} -> {fine} (ratio {})", fine / coarse);
        assert!(fine < 0.2, "L2 curvature error {fine}");
        assert!(fine < 0.5 * coarse, "no decay: {coarse} -> {fine}");
    }

    #[test]
    fn mass_solver_round_trip_and_projection_residual() {
        let mesh = shapes::icosphere(3);
        let ops = build_element_operators(&mesh).unwrap();
        let mass = MassSolver::new(&mesh, &ops).unwrap();
        let f: Vec<f64> = (0..mesh.n_vertices()).map(|j| (j as f64).sin()).collect();
        let mf = surfcalc::mass_apply_scalar(&mesh, &ops, &f);
        let back = mass.solve(&mf);
        for (a, b) in back.iter().zip(&f) {
            assert!((a - b).abs() < 1e-10);
        }

        let pi: Vec<f64> = mesh.positions().iter().map(|p| p.x * p.y + 0.3 * p.z).collect();
        let (g, residual) = project_pressure_gradient(&mesh, &ops, &mass, &pi);
        assert!(residual < 1e-10, "projection residual {residual}");
        assert_eq!(g.len(), mesh.n_vertices());
        // the projection equation itself holds against every P1 test field
        let grad = surfcalc::scalar_gradient(&mesh, &ops, &pi);
        for c in 0..3 {
            let comp: Vec<f64> = g.iter().map(|v| v[c]).collect();
            let mg = surfcalc::mass_apply_scalar(&mesh, &ops, &comp);
            let mut b = vec![0.0; mesh.n_vertices()];
            for (k, tri) in mesh.triangles().iter().enumerate() {
                for &v in tri {
                    b[v] += ops[k].area / 3.0 * grad[k][c];
                }
            }
            for (a, bb) in mg.iter().zip(&b) {
                assert!((a - bb).abs() < 1e-10);
            }
        }
    }
}
