//! Surface finite element simulation of inextensible viscous lipid
//! membranes with Canham-Helfrich bending elasticity.
//!
//! The membrane is a closed triangulated surface moving with the velocity
//! field of a mixed velocity/surface-pressure/curvature saddle-point
//! problem, assembled on the current surface and solved by sparse LU at
//! every step. Vertices are updated in a Lagrangian way; quality-triggered
//! remeshing keeps the discretization usable over long runs.

pub mod assembly;
pub mod config;
pub mod error;
pub mod io;
pub mod mesh;
pub mod remesh;
pub mod shapes;
pub mod solver;
pub mod stepper;
pub mod surfcalc;
pub mod tetherlab;
pub mod tweezer;

pub use error::{Error, Result};
