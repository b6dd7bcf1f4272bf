//! Virtual tweezers: localized exponential repulsion with a semi-implicit
//! velocity linearization, driven either at fixed velocity or by a
//! proportional force-feedback controller.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::assembly::ExternalLoad;
use crate::error::{Error, Result};
use crate::mesh::{SurfaceMesh, Vec3};
use crate::surfcalc::ElementOperator;

/// Default stiffness of the repulsive potential.
pub const DEFAULT_STIFFNESS: f64 = 1e5;
/// Default decay length as a fraction of the tweezer radius.
pub const DECAY_RADIUS_FRACTION: f64 = 1.0 / 50.0;
/// Velocity clamp for the force-feedback controller.
pub const MAX_CONTROLLER_SPEED: f64 = 1e4;

/// How the tweezer center moves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DriveMode {
    /// Prescribed center velocity.
    Velocity { velocity: Vec3 },
    /// Proportional feedback on the magnitude of the exerted force,
    /// adjusting the speed along a fixed direction.
    Force {
        target: f64,
        direction: Vec3,
        gain: f64,
        /// Current controller speed along `direction`.
        speed: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tweezer {
    pub center: Vec3,
    pub radius: f64,
    pub stiffness: f64,
    pub decay: f64,
    pub mode: DriveMode,
    /// Activation window in simulation time; the tweezer exerts no force
    /// outside it.
    pub active_from: f64,
    pub active_until: f64,
    /// Explicit-part force integral of the previous step (diagnostic and
    /// controller feedback).
    pub last_force: Vec3,
}

impl Tweezer {
    /// Velocity-driven tweezer with the default stiffness and decay.
    pub fn velocity_driven(center: Vec3, radius: f64, velocity: Vec3) -> Self {
        Self {
            center,
            radius,
            stiffness: DEFAULT_STIFFNESS,
            decay: radius * DECAY_RADIUS_FRACTION,
            mode: DriveMode::Velocity { velocity },
            active_from: 0.0,
            active_until: f64::INFINITY,
            last_force: Vec3::zeros(),
        }
    }

    /// Force-driven tweezer pulling along `direction` toward a target
    /// force magnitude.
    pub fn force_driven(center: Vec3, radius: f64, target: f64, direction: Vec3, gain: f64) -> Self {
        Self {
            center,
            radius,
            stiffness: DEFAULT_STIFFNESS,
            decay: radius * DECAY_RADIUS_FRACTION,
            mode: DriveMode::Force {
                target,
                direction: direction.normalize(),
                gain,
                speed: 0.0,
            },
            active_from: 0.0,
            active_until: f64::INFINITY,
            last_force: Vec3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::Parameter(format!(
                "tweezer radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.decay > 0.0) {
            return Err(Error::Parameter("tweezer decay length must be positive".into()));
        }
        if !(self.stiffness > 0.0) {
            return Err(Error::Parameter("tweezer stiffness must be positive".into()));
        }
        Ok(())
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.active_from && t <= self.active_until
    }

    /// Penetration of a point into the tweezer, `w = r_T - |x - x_T|`.
    pub fn penetration(&self, x: &Vec3) -> Result<f64> {
        let d = x - self.center;
        let dist = d.norm();
        if dist < 1e-12 * self.radius {
            return Err(Error::SingularDistance { vertex: usize::MAX });
        }
        Ok(self.radius - dist)
    }

    /// Center position after one step of size `dt`, without committing the
    /// move; the controller speed update for force mode happens in
    /// [`Tweezer::advance`].
    pub fn next_center(&self, dt: f64, measured_force: f64) -> (Vec3, DriveMode) {
        match &self.mode {
            DriveMode::Velocity { velocity } => {
                (self.center + dt * velocity, self.mode.clone())
            }
            DriveMode::Force {
                target,
                direction,
                gain,
                speed,
            } => {
                let mut new_speed = speed + gain * (target - measured_force);
                new_speed = new_speed.clamp(-MAX_CONTROLLER_SPEED, MAX_CONTROLLER_SPEED);
                (
                    self.center + dt * new_speed * direction,
                    DriveMode::Force {
                        target: *target,
                        direction: *direction,
                        gain: *gain,
                        speed: new_speed,
                    },
                )
            }
        }
    }

    /// Commit a step: move the center (velocity update rule or feedback
    /// controller) and store the measured force.
    pub fn advance(&mut self, dt: f64, measured_force: Vec3) {
        let (center, mode) = self.next_center(dt, measured_force.norm());
        self.center = center;
        self.mode = mode;
        self.last_force = measured_force;
    }
}

/// Nodal explicit force: `k_T exp(w_new/l_T) d_old/|d_old|` evaluated at a
/// vertex, with the penetration taken at the already-advanced center.
fn nodal_force(tweezer: &Tweezer, new_center: &Vec3, x: &Vec3, vertex: usize) -> Result<Vec3> {
    let d_old = x - tweezer.center;
    let dist_old = d_old.norm();
    if dist_old < 1e-12 * tweezer.radius {
        return Err(Error::SingularDistance { vertex });
    }
    let w_new = tweezer.radius - (x - new_center).norm();
    Ok(tweezer.stiffness * (w_new / tweezer.decay).exp() / dist_old * d_old)
}

/// Force contributions of one tweezer on the current surface: the explicit
/// nodal right-hand side (integrated against the P1 basis with the
/// consistent mass) and the semi-implicit per-vertex rank-one blocks that
/// must be added to the velocity diagonal. `new_center` is the center at
/// the end of the step being assembled.
pub fn force_contributions(
    mesh: &SurfaceMesh,
    ops: &[ElementOperator],
    tweezer: &Tweezer,
    new_center: &Vec3,
    dt: f64,
) -> Result<ExternalLoad> {
    let n = mesh.n_vertices();
    let mut nodal = vec![Vec3::zeros(); n];
    let mut blocks = Vec::new();
    let lumped = mesh.lumped_vertex_areas();
    for (j, x) in mesh.positions().iter().enumerate() {
        nodal[j] = nodal_force(tweezer, new_center, x, j)?;

        let d_old = x - tweezer.center;
        let dist_old = d_old.norm();
        let w_old = tweezer.radius - dist_old;
        let coef = tweezer.stiffness * dt / tweezer.decay * (w_old / tweezer.decay).exp()
            / (dist_old * dist_old);
        let scaled = lumped[j] * coef;
        if scaled > 0.0 && scaled.is_finite() {
            let block: Matrix3<f64> = scaled * d_old * d_old.transpose();
            blocks.push((j, block));
        }
    }

    // integrate the explicit density against every P1 test function
    let mut rhs = vec![Vec3::zeros(); n];
    for (tri, op) in mesh.triangles().iter().zip(ops) {
        let w = op.area / 12.0;
        let sum: Vec3 = tri.iter().map(|&v| nodal[v]).sum();
        for &v in tri {
            rhs[v] += w * (sum + nodal[v]);
        }
    }
    Ok(ExternalLoad {
        rhs: rhs.into_iter().enumerate().collect(),
        vertex_blocks: blocks,
    })
}

/// Diagnostic integral of the explicit force density over the surface.
pub fn total_force(mesh: &SurfaceMesh, tweezer: &Tweezer, new_center: &Vec3) -> Result<Vec3> {
    let lumped = mesh.lumped_vertex_areas();
    let mut total = Vec3::zeros();
    for (j, x) in mesh.positions().iter().enumerate() {
        total += lumped[j] * nodal_force(tweezer, new_center, x, j)?;
    }
    Ok(total)
}
