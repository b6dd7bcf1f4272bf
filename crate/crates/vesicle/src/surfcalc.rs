//! Discrete tangential calculus on P1 fields over flat triangles.
//!
//! Every triangle carries the constant tangent gradients of its three
//! barycentric shape functions, from which surface gradients, strain rates
//! and divergences of piecewise-linear fields follow by small dense algebra.
//! All element integrals of P1 x P1 products use the exact closed-form
//! quadrature, so there is no quadrature-order parameter anywhere.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::mesh::{SurfaceMesh, Vec3};

/// Nodal scalar field, one value per mesh vertex, piecewise linear.
pub type ScalarField = Vec<f64>;
/// Nodal vector field, one 3-vector per mesh vertex, piecewise linear.
pub type VectorField = Vec<Vec3>;

/// Per-element data for tangential calculus: the tangent projector
/// `P = I - n (x) n`, the shape-function gradients (tangent, summing to
/// zero), area, normal and diameter.
#[derive(Debug, Clone)]
pub struct ElementOperator {
    pub area: f64,
    pub normal: Vec3,
    pub diameter: f64,
    pub shape_gradients: [Vec3; 3],
    pub projector: Matrix3<f64>,
}

/// Build the element operators for every triangle of the mesh.
pub fn build_element_operators(mesh: &SurfaceMesh) -> Result<Vec<ElementOperator>> {
    let mut ops = Vec::with_capacity(mesh.n_triangles());
    for k in 0..mesh.n_triangles() {
        let geom = mesh.element_geometry(k)?;
        let [p0, p1, p2] = mesh.triangle_positions(k);
        let n = geom.normal;
        let inv_two_area = 1.0 / (2.0 * geom.area);
        // gradient of the hat function at vertex i: rotate the opposite edge
        // into the triangle plane, scaled by 1/(2A)
        let shape_gradients = [
            n.cross(&(p2 - p1)) * inv_two_area,
            n.cross(&(p0 - p2)) * inv_two_area,
            n.cross(&(p1 - p0)) * inv_two_area,
        ];
        let projector = Matrix3::identity() - n * n.transpose();
        ops.push(ElementOperator {
            area: geom.area,
            normal: n,
            diameter: geom.diameter,
            shape_gradients,
            projector,
        });
    }
    Ok(ops)
}

/// Per-element constant surface gradient of a P1 scalar field.
pub fn scalar_gradient(mesh: &SurfaceMesh, ops: &[ElementOperator], field: &[f64]) -> Vec<Vec3> {
    debug_assert_eq!(field.len(), mesh.n_vertices());
    mesh.triangles()
        .iter()
        .zip(ops)
        .map(|(tri, op)| {
            field[tri[0]] * op.shape_gradients[0]
                + field[tri[1]] * op.shape_gradients[1]
                + field[tri[2]] * op.shape_gradients[2]
        })
        .collect()
}

/// Per-element surface gradient of a P1 vector field; row i holds the
/// surface gradient of component i.
pub fn vector_gradient(
    mesh: &SurfaceMesh,
    ops: &[ElementOperator],
    field: &[Vec3],
) -> Vec<Matrix3<f64>> {
    debug_assert_eq!(field.len(), mesh.n_vertices());
    mesh.triangles()
        .iter()
        .zip(ops)
        .map(|(tri, op)| element_vector_gradient(tri, op, field))
        .collect()
}

pub(crate) fn element_vector_gradient(
    tri: &[usize; 3],
    op: &ElementOperator,
    field: &[Vec3],
) -> Matrix3<f64> {
    let mut grad = Matrix3::zeros();
    for local in 0..3 {
        grad += field[tri[local]] * op.shape_gradients[local].transpose();
    }
    grad
}

/// Surface rate-of-strain `D_G u = (1/2) P (grad u + grad u^T) P`
/// per element.
pub fn strain_rate(mesh: &SurfaceMesh, ops: &[ElementOperator], field: &[Vec3]) -> Vec<Matrix3<f64>> {
    mesh.triangles()
        .iter()
        .zip(ops)
        .map(|(tri, op)| {
            let grad = element_vector_gradient(tri, op, field);
            let sym = 0.5 * (grad + grad.transpose());
            op.projector * sym * op.projector
        })
        .collect()
}

/// Surface divergence (trace of the surface gradient) per element.
pub fn divergence(mesh: &SurfaceMesh, ops: &[ElementOperator], field: &[Vec3]) -> Vec<f64> {
    mesh.triangles()
        .iter()
        .zip(ops)
        .map(|(tri, op)| {
            (0..3)
                .map(|local| field[tri[local]].dot(&op.shape_gradients[local]))
                .sum()
        })
        .collect()
}

/// Triplets of the consistent scalar P1 mass matrix,
/// element block `(A_K/12) [[2,1,1],[1,2,1],[1,1,2]]`.
pub fn mass_triplets(mesh: &SurfaceMesh, ops: &[ElementOperator]) -> Vec<(usize, usize, f64)> {
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for (tri, op) in mesh.triangles().iter().zip(ops) {
        let w = op.area / 12.0;
        for i in 0..3 {
            for j in 0..3 {
                let val = if i == j { 2.0 * w } else { w };
                triplets.push((tri[i], tri[j], val));
            }
        }
    }
    triplets
}

/// Apply the consistent mass matrix to a scalar field by element loops.
pub fn mass_apply_scalar(mesh: &SurfaceMesh, ops: &[ElementOperator], field: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for (tri, op) in mesh.triangles().iter().zip(ops) {
        let w = op.area / 12.0;
        let sum: f64 = tri.iter().map(|&v| field[v]).sum();
        for &v in tri {
            out[v] += w * (sum + field[v]);
        }
    }
    out
}

/// `integral of f*g` over the surface with both fields P1 (consistent mass).
pub fn mass_inner_scalar(mesh: &SurfaceMesh, ops: &[ElementOperator], f: &[f64], g: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (tri, op) in mesh.triangles().iter().zip(ops) {
        let w = op.area / 12.0;
        let sf: f64 = tri.iter().map(|&v| f[v]).sum();
        let sg: f64 = tri.iter().map(|&v| g[v]).sum();
        let diag: f64 = tri.iter().map(|&v| f[v] * g[v]).sum();
        acc += w * (sf * sg + diag);
    }
    acc
}

/// `integral of u . v` for P1 vector fields (consistent mass).
pub fn mass_inner_vector(mesh: &SurfaceMesh, ops: &[ElementOperator], u: &[Vec3], v: &[Vec3]) -> f64 {
    let mut acc = 0.0;
    for (tri, op) in mesh.triangles().iter().zip(ops) {
        let w = op.area / 12.0;
        let su: Vec3 = tri.iter().map(|&i| u[i]).sum();
        let sv: Vec3 = tri.iter().map(|&i| v[i]).sum();
        let diag: f64 = tri.iter().map(|&i| u[i].dot(&v[i])).sum();
        acc += w * (su.dot(&sv) + diag);
    }
    acc
}

/// L2 norm of a P1 scalar field with the consistent mass matrix.
pub fn l2_norm_scalar(mesh: &SurfaceMesh, ops: &[ElementOperator], f: &[f64]) -> f64 {
    mass_inner_scalar(mesh, ops, f, f).max(0.0).sqrt()
}

/// L2 norm of a P1 vector field with the consistent mass matrix.
pub fn l2_norm_vector(mesh: &SurfaceMesh, ops: &[ElementOperator], u: &[Vec3]) -> f64 {
    mass_inner_vector(mesh, ops, u, u).max(0.0).sqrt()
}

/// Evaluate `w(x) = omega x x + beta` at the mesh vertices: the discrete
/// rigid modes annihilated by the viscous form.
pub fn rigid_mode(mesh: &SurfaceMesh, omega: Vec3, beta: Vec3) -> VectorField {
    mesh.positions().iter().map(|p| omega.cross(p) + beta).collect()
}

/// Verify the algebraic identities of one element operator; used by tests
/// and by debug assertions during assembly bring-up.
pub fn check_operator(op: &ElementOperator) -> Result<()> {
    let sum: Vec3 = op.shape_gradients.iter().sum();
    if sum.norm() > 1e-12 {
        return Err(Error::Parameter(format!(
            "shape gradients do not sum to zero: {}",
            sum.norm()
        )));
    }
    for g in &op.shape_gradients {
        if g.dot(&op.normal).abs() > 1e-12 * g.norm().max(1.0) {
            return Err(Error::Parameter("shape gradient not tangent".into()));
        }
    }
    let p = op.projector;
    if (p * p - p).norm() > 1e-12 || (p * op.normal).norm() > 1e-12 || (p.trace() - 2.0).abs() > 1e-12 {
        return Err(Error::Parameter("projector identities violated".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0x5eed)
    }

    fn rand_vec3(rng: &mut ChaCha8Rng) -> Vec3 {
        Vector3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    }

    #[test]
    fn operator_identities_hold_on_spheres_and_oblates() {
        for mesh in [shapes::icosphere(3), shapes::ellipsoid(3, 1.4, 1.0, 0.5)] {
            let ops = build_element_operators(&mesh).unwrap();
            for op in &ops {
                check_operator(op).unwrap();
            }
        }
    }

    #[test]
    fn flat_patch_projector_and_gradient() {
        // tetrahedron with one face in z=0: its projector is diag(1,1,0)
        let positions = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.3, 0.3, 1.0),
        ];
        let triangles = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
        let mesh = crate::mesh::SurfaceMesh::new(positions, triangles).unwrap();
        let ops = build_element_operators(&mesh).unwrap();
        let p = ops[0].projector;
        let expected = nalgebra::Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        assert!((p - expected).norm() < 1e-14);

        // f(x) = a . x with a in-plane: gradient a on that element
        let a = Vec3::new(0.7, -0.2, 0.0);
        let f: Vec<f64> = mesh.positions().iter().map(|x| a.dot(x)).collect();
        let grads = scalar_gradient(&mesh, &ops, &f);
        assert!((grads[0] - a).norm() < 1e-13);

        // f(x) = x . e_z is constant (0) on the z=0 patch
        let fz: Vec<f64> = mesh.positions().iter().map(|x| x.z).collect();
        let gz = scalar_gradient(&mesh, &ops, &fz);
        assert!(gz[0].norm() < 1e-13);

        // constant field: zero gradient everywhere
        let ones = vec![1.0; mesh.n_vertices()];
        for g in scalar_gradient(&mesh, &ops, &ones) {
            assert!(g.norm() < 1e-13);
        }
    }

    #[test]
    fn strain_rate_kernel_contains_rigid_modes() {
        let mut rng = rng();
        for mesh in [shapes::icosphere(2), shapes::ellipsoid(2, 1.8, 0.9, 0.6)] {
            let ops = build_element_operators(&mesh).unwrap();
            for _ in 0..20 {
                let w = rigid_mode(&mesh, rand_vec3(&mut rng), rand_vec3(&mut rng));
                for d in strain_rate(&mesh, &ops, &w) {
                    assert!(d.norm() < 1e-10, "rigid strain {}", d.norm());
                }
                for div in divergence(&mesh, &ops, &w) {
                    assert!(div.abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn identity_field_on_flat_element() {
        // u(x) = x gives grad_G u = P, hence D = P and div = 2
        let positions = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.3, 0.3, 1.0),
        ];
        let triangles = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
        let mesh = crate::mesh::SurfaceMesh::new(positions, triangles).unwrap();
        let ops = build_element_operators(&mesh).unwrap();
        let u: Vec<Vec3> = mesh.positions().to_vec();
        let d = strain_rate(&mesh, &ops, &u);
        let div = divergence(&mesh, &ops, &u);
        for k in 0..mesh.n_triangles() {
            assert!((d[k] - ops[k].projector).norm() < 1e-13);
            assert!((div[k] - 2.0).abs() < 1e-13);
            // D annihilates the normal and is symmetric
            assert!((d[k] * ops[k].normal).norm() < 1e-13);
            assert!((d[k] - d[k].transpose()).norm() < 1e-14);
        }
    }

    #[test]
    fn divergence_matches_dense_oracle_for_affine_fields() {
        let mut rng = rng();
        let mesh = shapes::icosphere(2);
        let ops = build_element_operators(&mesh).unwrap();
        for _ in 0..10 {
            // u(x) = M x + b, the dense oracle evaluates trace(P M P)
            let m = nalgebra::Matrix3::from_fn(|_, _| rng.gen::<f64>() - 0.5);
            let b = rand_vec3(&mut rng);
            let u: Vec<Vec3> = mesh.positions().iter().map(|x| m * x + b).collect();
            let div = divergence(&mesh, &ops, &u);
            for (k, op) in ops.iter().enumerate() {
                let oracle = (op.projector * m * op.projector).trace();
                assert!((div[k] - oracle).abs() < 1e-11, "{} vs {}", div[k], oracle);
            }
        }
    }

    /// Order-4 Dunavant quadrature on a triangle, the independent oracle for
    /// the exact P1 x P1 integration formulas.
    fn quadrature_p1p1(p: [Vec3; 3], fi: [f64; 3], gi: [f64; 3]) -> f64 {
        const W: [f64; 6] = [
            0.223381589678011,
            0.223381589678011,
            0.223381589678011,
            0.109951743655322,
            0.109951743655322,
            0.109951743655322,
        ];
        const A: [[f64; 3]; 6] = [
            [0.445948490915965, 0.445948490915965, 0.108103018168070],
            [0.445948490915965, 0.108103018168070, 0.445948490915965],
            [0.108103018168070, 0.445948490915965, 0.445948490915965],
            [0.091576213509771, 0.091576213509771, 0.816847572980459],
            [0.091576213509771, 0.816847572980459, 0.091576213509771],
            [0.816847572980459, 0.091576213509771, 0.091576213509771],
        ];
        let area = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
        let mut acc = 0.0;
        for q in 0..6 {
            let f: f64 = (0..3).map(|i| A[q][i] * fi[i]).sum();
            let g: f64 = (0..3).map(|i| A[q][i] * gi[i]).sum();
            acc += W[q] * f * g;
        }
        acc * area
    }

    #[test]
    fn mass_matrix_exactness_against_quadrature_oracle() {
        let mut rng = rng();
        for _ in 0..50 {
            // random non-degenerate triangle embedded in 3D
            let p = [rand_vec3(&mut rng) * 2.0, rand_vec3(&mut rng) * 2.0, rand_vec3(&mut rng) * 2.0];
            let area = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
            if area < 1e-3 {
                continue;
            }
            let fi = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            let gi = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            // closed form via the element mass block
            let w = area / 12.0;
            let mut exact = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    exact += fi[i] * gi[j] * if i == j { 2.0 * w } else { w };
                }
            }
            let quad = quadrature_p1p1(p, fi, gi);
            assert!(
                (exact - quad).abs() <= 1e-13 * exact.abs().max(1.0),
                "exact {exact} quad {quad}"
            );
        }
    }

    #[test]
    fn mass_matrix_row_sums_and_positivity() {
        let mesh = shapes::icosphere(2);
        let ops = build_element_operators(&mesh).unwrap();
        let triplets = mass_triplets(&mesh, &ops);
        // total sum of entries = total area
        let total: f64 = triplets.iter().map(|t| t.2).sum();
        assert!((total - mesh.total_area()).abs() < 1e-12 * total);
        // row sums match lumped areas
        let mut rows = vec![0.0; mesh.n_vertices()];
        for (i, _, v) in &triplets {
            rows[*i] += v;
        }
        for (r, a) in rows.iter().zip(mesh.lumped_vertex_areas()) {
            assert!((r - a).abs() < 1e-13);
        }
        // SPD: dense eigensolve on a small mesh (42 vertices)
        let small = shapes::icosphere(2);
        let n = small.n_vertices();
        assert!(n <= 100);
        let ops = build_element_operators(&small).unwrap();
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for (i, j, v) in mass_triplets(&small, &ops) {
            dense[(i, j)] += v;
        }
        let eig = dense.symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0, "smallest mass eigenvalue {min}");
    }

    #[test]
    fn mass_apply_consistent_with_inner_product() {
        let mut rng = rng();
        let mesh = shapes::icosphere(3);
        let ops = build_element_operators(&mesh).unwrap();
        let f: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.gen::<f64>()).collect();
        let g: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.gen::<f64>()).collect();
        let mf = mass_apply_scalar(&mesh, &ops, &f);
        let dot: f64 = mf.iter().zip(&g).map(|(a, b)| a * b).sum();
        let inner = mass_inner_scalar(&mesh, &ops, &f, &g);
        assert!((dot - inner).abs() < 1e-12 * inner.abs().max(1.0));
    }
}
