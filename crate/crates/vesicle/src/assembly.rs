//! Assembly of the sparse saddle-point system solved at every time step,
//! plus the scalar functionals (bending energy, viscous dissipation).
//!
//! Unknown ordering: `[u (3N) | pi (N) | kappa (3N) | p (1) | rigid (6)]`,
//! total dimension `7N + 7`. The assembled multiplier in the pi slot is the
//! negative of the physical surface pressure; with that convention the
//! velocity/pressure coupling appears as a matching `(B^T, B)` transpose
//! pair and the pressure-gradient-projection block enters the pi diagonal
//! negative semidefinite. Extraction flips the sign back (see
//! [`crate::solver::extract_fields`]).

use faer::sparse::{SparseColMat, Triplet};
use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::mesh::{SurfaceMesh, Vec3};
use crate::surfcalc::{self, ElementOperator};

/// Non-dimensional material and scheme parameters.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    /// Surface shear viscosity (non-dimensional scale 1).
    pub mu: f64,
    /// Bending modulus (non-dimensional scale 1).
    pub bending_modulus: f64,
    /// Pressure stabilization coefficient: gamma_K = gamma_factor * h_K^2 / mu.
    pub gamma_factor: f64,
    /// Area controller time in units of dt.
    pub tau_area_steps: f64,
    /// Volume controller time in units of dt.
    pub tau_volume_steps: f64,
    /// Curvature/velocity stabilization time in units of dt.
    pub tau_kappa_steps: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            bending_modulus: 1.0,
            gamma_factor: 0.1,
            tau_area_steps: 10.0,
            tau_volume_steps: 10.0,
            tau_kappa_steps: 1.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::Parameter(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.bending_modulus >= 0.0) {
            return Err(Error::Parameter(format!(
                "bending_modulus must be nonnegative, got {}",
                self.bending_modulus
            )));
        }
        if !(self.tau_area_steps > 0.0) || !(self.tau_volume_steps > 0.0) {
            return Err(Error::Parameter(
                "controller times tau_a, tau_v must be positive".into(),
            ));
        }
        if !(self.tau_kappa_steps >= 0.0) {
            return Err(Error::Parameter("tau_kappa must be nonnegative".into()));
        }
        if !(self.gamma_factor >= 0.0) {
            return Err(Error::Parameter("gamma_factor must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Degree-of-freedom layout of the saddle system.
pub mod layout {
    #[inline]
    pub fn velocity(j: usize, c: usize) -> usize {
        3 * j + c
    }
    #[inline]
    pub fn pressure(n: usize, j: usize) -> usize {
        3 * n + j
    }
    #[inline]
    pub fn curvature(n: usize, j: usize, c: usize) -> usize {
        4 * n + 3 * j + c
    }
    #[inline]
    pub fn internal_pressure(n: usize) -> usize {
        7 * n
    }
    #[inline]
    pub fn rigid(n: usize, i: usize) -> usize {
        7 * n + 1 + i
    }
    #[inline]
    pub fn dim(n: usize) -> usize {
        7 * n + 7
    }
}

pub type Trip = (usize, usize, f64);

/// Viscous block `2 mu int D_G u : D_G v` over velocity dofs (3N x 3N).
/// Symmetric positive semidefinite; annihilates the six rigid modes.
pub fn assemble_viscous(mesh: &SurfaceMesh, ops: &[ElementOperator], mu: f64) -> Vec<Trip> {
    let mut trips = Vec::with_capacity(81 * mesh.n_triangles());
    for (tri, op) in mesh.triangles().iter().zip(ops) {
        let w = mu * op.area;
        let p = &op.projector;
        for i in 0..3 {
            for l in 0..3 {
                let gi = op.shape_gradients[i];
                let gl = op.shape_gradients[l];
                let gg = gi.dot(&gl);
                for a in 0..3 {
                    for b in 0..3 {
                        let val = w * (p[(a, b)] * gg + gl[a] * gi[b]);
                        trips.push((layout::velocity(tri[i], a), layout::velocity(tri[l], b), val));
                    }
                }
            }
        }
    }
    trips
}

/// Inextensibility coupling `int xi div_G u` (N rows x 3N cols).
pub fn assemble_inextensibility(mesh: &SurfaceMesh, ops: &[ElementOperator]) -> Vec<Trip> {
    let mut trips = Vec::with_capacity(27 * mesh.n_triangles());
    for (tri, op) in mesh.triangles().iter().zip(ops) {
        let w = op.area / 3.0;
        for i in 0..3 {
            for l in 0..3 {
                let g = op.shape_gradients[l];
                for b in 0..3 {
                    trips.push((tri[i], layout::velocity(tri[l], b), w * g[b]));
                }
            }
        }
    }
    trips
}

/// Element stabilization parameter `gamma_K = factor * h_K^2 / mu`.
pub fn pgp_gamma(h_k: f64, mu: f64, factor: f64) -> f64 {
    factor * h_k * h_k / mu
}

/// Pressure-gradient-projection stabilization: the (positive semidefinite)
/// block `sum_K gamma_K int_K grad xi . grad pi` (N x N) and the right-hand
/// contribution `sum_K gamma_K int_K g_h . grad xi` from the lagged
/// projection `g_h`.
pub fn assemble_pgp(
    mesh: &SurfaceMesh,
    ops: &[ElementOperator],
    mu: f64,
    factor: f64,
    g_h: &[Vec3],
) -> (Vec<Trip>, Vec<f64>) {
    let mut trips = Vec::with_capacity(9 * mesh.n_triangles());
    let mut rhs = vec![0.0; mesh.n_vertices()];
    for (tri, op) in mesh.triangles().iter().zip(ops) {
        let gamma = pgp_gamma(op.diameter, mu, factor);
        let w = gamma * op.area;
        let g_mean = (g_h[tri[0]] + g_h[tri[1]] + g_h[tri[2]]) / 3.0;
        for i in 0..3 {
            let gi = op.shape_gradients[i];
            rhs[tri[i]] += w * g_mean.dot(&gi);
            for l in 0..3 {
                trips.push((tri[i], tri[l], w * gi.dot(&op.shape_gradients[l])));
            }
        }
    }
    (trips, rhs)
}

/// Bending-force coupling of the curvature field into the velocity
/// equation (3N x 3N) and the geometric right-hand side of the curvature
/// identity, `b[J] = sum_K A_K grad phi_J` (the discrete area gradient).
pub fn assemble_elastic_coupling(
    mesh: &SurfaceMesh,
    ops: &[ElementOperator],
    bending_modulus: f64,
) -> (Vec<Trip>, Vec<f64>) {
    let n = mesh.n_vertices();
    let mut trips = Vec::with_capacity(81 * mesh.n_triangles());
    let mut rhs = vec![0.0; 3 * n];
    for (tri, op) in mesh.triangles().iter().zip(ops) {
        let area = op.area;
        // I - 2P = 2 n (x) n - I
        let i2p = Matrix3::identity() - 2.0 * op.projector;
        for i in 0..3 {
            let gi = op.shape_gradients[i];
            for a in 0..3 {
                rhs[layout::velocity(tri[i], a)] += area * gi[a];
            }
            for l in 0..3 {
                let gl = op.shape_gradients[l];
                let gg = gi.dot(&gl);
                for a in 0..3 {
                    for b in 0..3 {
                        let val = bending_modulus * area * (i2p[(a, b)] * gg + 0.5 * gi[a] * gl[b]);
                        trips.push((layout::velocity(tri[i], a), layout::velocity(tri[l], b), val));
                    }
                }
            }
        }
    }
    (trips, rhs)
}

/// Blocks of the discrete curvature identity rows: the velocity coupling
/// `-tau_kappa int grad_G u : grad_G zeta` and the consistent vector mass
/// acting on kappa. Both are indexed locally over (3N x 3N).
pub struct CurvatureIdentity {
    pub velocity_coupling: Vec<Trip>,
    pub mass: Vec<Trip>,
}

pub fn assemble_curvature_identity(
    mesh: &SurfaceMesh,
    ops: &[ElementOperator],
    tau_kappa: f64,
) -> CurvatureIdentity {
    let mut coupling = Vec::new();
    let mut mass = Vec::with_capacity(27 * mesh.n_triangles());
    for (tri, op) in mesh.triangles().iter().zip(ops) {
        let wm = op.area / 12.0;
        for i in 0..3 {
            for l in 0..3 {
                let m = if i == l { 2.0 * wm } else { wm };
                let stiff = -tau_kappa * op.area * op.shape_gradients[i].dot(&op.shape_gradients[l]);
                for a in 0..3 {
                    mass.push((layout::velocity(tri[i], a), layout::velocity(tri[l], a), m));
                    if tau_kappa != 0.0 {
                        coupling.push((layout::velocity(tri[i], a), layout::velocity(tri[l], a), stiff));
                    }
                }
            }
        }
    }
    CurvatureIdentity {
        velocity_coupling: coupling,
        mass,
    }
}

/// Volume constraint row `int u . n = (V* - V)/tau_v` with the element-wise
/// discrete normal: entries `(A_K/3) n_K` accumulated to vertices.
pub fn assemble_volume_constraint(
    mesh: &SurfaceMesh,
    ops: &[ElementOperator],
    volume_target: f64,
    volume: f64,
    tau_v: f64,
) -> Result<(Vec<f64>, f64)> {
    if !(tau_v > 0.0) {
        return Err(Error::Parameter("tau_v must be positive".into()));
    }
    let mut row = vec![0.0; 3 * mesh.n_vertices()];
    for (tri, op) in mesh.triangles().iter().zip(ops) {
        let w = op.area / 3.0;
        for &v in tri {
            for b in 0..3 {
                row[layout::velocity(v, b)] += w * op.normal[b];
            }
        }
    }
    Ok((row, (volume_target - volume) / tau_v))
}

/// Area controller right-hand side for the pi equation:
/// `(A* - A)/(A tau_a)` times the lumped vertex areas.
pub fn assemble_area_controller_rhs(
    mesh: &SurfaceMesh,
    area_target: f64,
    area: f64,
    tau_a: f64,
) -> Result<Vec<f64>> {
    if !(tau_a > 0.0) {
        return Err(Error::Parameter("tau_a must be positive".into()));
    }
    if !(area > 0.0) {
        return Err(Error::Parameter("current area must be positive".into()));
    }
    let coef = (area_target - area) / (area * tau_a);
    Ok(mesh
        .lumped_vertex_areas()
        .iter()
        .map(|a_j| coef * a_j)
        .collect())
}

/// The six rigid-mode filter rows: consistent-mass integrals of `u`
/// (rows 0..3) and of `x ^ u` (rows 3..6), each over the 3N velocity dofs.
pub fn assemble_rigid_filter(mesh: &SurfaceMesh, ops: &[ElementOperator]) -> [Vec<f64>; 6] {
    let n = mesh.n_vertices();
    let mut rows: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; 3 * n]);

    let lumped = mesh.lumped_vertex_areas();
    for j in 0..n {
        for c in 0..3 {
            rows[c][layout::velocity(j, c)] = lumped[j];
        }
    }

    // mass-weighted positions m_L = sum_J M_JL X_J, then row entries
    // (m_L ^ e_b)_c for the rotation integrals
    let mut weighted = vec![Vec3::zeros(); n];
    for (tri, op) in mesh.triangles().iter().zip(ops) {
        let w = op.area / 12.0;
        let sum: Vec3 = tri.iter().map(|&v| mesh.positions()[v]).sum();
        for &v in tri {
            weighted[v] += w * (sum + mesh.positions()[v]);
        }
    }
    for l in 0..n {
        for b in 0..3 {
            let mut e = Vec3::zeros();
            e[b] = 1.0;
            let cross = weighted[l].cross(&e);
            for c in 0..3 {
                rows[3 + c][layout::velocity(l, b)] = cross[c];
            }
        }
    }
    rows
}

/// Canham-Helfrich bending energy `(c/2) int |kappa_h|^2` with the
/// consistent mass matrix.
pub fn energy(
    mesh: &SurfaceMesh,
    ops: &[ElementOperator],
    kappa: &[Vec3],
    bending_modulus: f64,
) -> f64 {
    0.5 * bending_modulus * surfcalc::mass_inner_vector(mesh, ops, kappa, kappa)
}

/// Viscous dissipation rate `int 2 mu |D_G u|^2`, evaluated by element
/// loops (an independent route from the assembled quadratic form).
pub fn dissipation(mesh: &SurfaceMesh, ops: &[ElementOperator], u: &[Vec3], mu: f64) -> f64 {
    surfcalc::strain_rate(mesh, ops, u)
        .iter()
        .zip(ops)
        .map(|(d, op)| 2.0 * mu * op.area * d.norm_squared())
        .sum()
}

/// External load already reduced to velocity-space data: an integrated
/// right-hand side plus symmetric per-vertex 3x3 blocks added to the
/// velocity diagonal (the semi-implicit part of the tweezer forces).
#[derive(Debug, Clone, Default)]
pub struct ExternalLoad {
    pub rhs: Vec<(usize, Vec3)>,
    pub vertex_blocks: Vec<(usize, Matrix3<f64>)>,
}

/// Everything the assembler needs besides the mesh itself.
pub struct SystemInputs<'a> {
    pub params: &'a ModelParams,
    pub dt: f64,
    /// Projection of the previous surface-pressure gradient.
    pub g_h: &'a [Vec3],
    pub area_target: f64,
    pub volume_target: f64,
    pub load: &'a ExternalLoad,
}

/// The assembled sparse saddle-point system.
pub struct SaddleSystem {
    pub n_vertices: usize,
    pub matrix: SparseColMat<usize, f64>,
    pub rhs: Vec<f64>,
}

/// Assemble the full system on the current surface.
pub fn assemble_system(
    mesh: &SurfaceMesh,
    ops: &[ElementOperator],
    inputs: &SystemInputs<'_>,
) -> Result<SaddleSystem> {
    inputs.params.validate()?;
    if !(inputs.dt > 0.0) {
        return Err(Error::Parameter(format!("dt must be positive, got {}", inputs.dt)));
    }
    let n = mesh.n_vertices();
    if inputs.g_h.len() != n {
        return Err(Error::Parameter(format!(
            "g_h length {} does not match vertex count {n}",
            inputs.g_h.len()
        )));
    }
    let params = inputs.params;
    let tau_kappa = params.tau_kappa_steps * inputs.dt;
    let tau_a = params.tau_area_steps * inputs.dt;
    let tau_v = params.tau_volume_steps * inputs.dt;
    let area = mesh.total_area();
    let volume = mesh.enclosed_volume();

    let dim = layout::dim(n);
    let pi0 = layout::pressure(n, 0);
    let kappa0 = layout::curvature(n, 0, 0);
    let p_col = layout::internal_pressure(n);

    let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::new();
    let mut rhs = vec![0.0; dim];

    // velocity rows: viscous + implicit tweezer blocks
    for (r, c, v) in assemble_viscous(mesh, ops, params.mu) {
        trips.push(Triplet::new(r, c, v));
    }
    for (vtx, block) in &inputs.load.vertex_blocks {
        for a in 0..3 {
            for b in 0..3 {
                let v = block[(a, b)];
                if v != 0.0 {
                    trips.push(Triplet::new(
                        layout::velocity(*vtx, a),
                        layout::velocity(*vtx, b),
                        v,
                    ));
                }
            }
        }
    }

    // velocity/pressure coupling as a matching transpose pair
    let inext = assemble_inextensibility(mesh, ops);
    for &(r, c, v) in &inext {
        trips.push(Triplet::new(pi0 + r, c, v)); // pi row
        trips.push(Triplet::new(c, pi0 + r, v)); // u row, pi column
    }

    // pressure stabilization, negative semidefinite on the pi diagonal
    let (pgp, pgp_rhs) = assemble_pgp(mesh, ops, params.mu, params.gamma_factor, inputs.g_h);
    for (r, c, v) in pgp {
        trips.push(Triplet::new(pi0 + r, pi0 + c, -v));
    }
    for (j, v) in pgp_rhs.iter().enumerate() {
        rhs[pi0 + j] += v;
    }

    // bending coupling into the velocity equation; geometric rhs of the
    // curvature identity
    let (elastic, geometric_rhs) = assemble_elastic_coupling(mesh, ops, params.bending_modulus);
    for (r, c, v) in elastic {
        trips.push(Triplet::new(r, kappa0 + c, v));
    }
    for (i, v) in geometric_rhs.iter().enumerate() {
        rhs[kappa0 + i] += v;
    }

    // curvature identity rows
    let ident = assemble_curvature_identity(mesh, ops, tau_kappa);
    for (r, c, v) in ident.velocity_coupling {
        trips.push(Triplet::new(kappa0 + r, c, v));
    }
    for (r, c, v) in ident.mass {
        trips.push(Triplet::new(kappa0 + r, kappa0 + c, v));
    }

    // volume constraint row and the internal-pressure column (-row)
    let (vol_row, vol_rhs) = assemble_volume_constraint(mesh, ops, inputs.volume_target, volume, tau_v)?;
    for (c, v) in vol_row.iter().enumerate() {
        if *v != 0.0 {
            trips.push(Triplet::new(p_col, c, *v));
            trips.push(Triplet::new(c, p_col, -*v));
        }
    }
    rhs[p_col] = vol_rhs;

    // area controller rhs on the pi rows
    for (j, v) in assemble_area_controller_rhs(mesh, inputs.area_target, area, tau_a)?
        .iter()
        .enumerate()
    {
        rhs[pi0 + j] += v;
    }

    // rigid-mode filter: six symmetric Lagrange multiplier pairs
    let rigid = assemble_rigid_filter(mesh, ops);
    for (i, row) in rigid.iter().enumerate() {
        let dof = layout::rigid(n, i);
        for (c, v) in row.iter().enumerate() {
            if *v != 0.0 {
                trips.push(Triplet::new(dof, c, *v));
                trips.push(Triplet::new(c, dof, *v));
            }
        }
    }

    // external (tweezer) load on the velocity rows
    for (vtx, f) in &inputs.load.rhs {
        for a in 0..3 {
            rhs[layout::velocity(*vtx, a)] += f[a];
        }
    }

    let matrix = SparseColMat::try_new_from_triplets(dim, dim, &trips)
        .map_err(|e| Error::SingularSystem(format!("sparse assembly failed: {e:?}")))?;
    Ok(SaddleSystem {
        n_vertices: n,
        matrix,
        rhs,
    })
}
