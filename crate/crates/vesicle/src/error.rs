//! Crate-wide error type.

use std::fmt;

use crate::mesh::QualityReport;

#[derive(Debug)]
pub enum Error {
    /// A triangle is degenerate or otherwise unusable.
    InvalidElement { element: usize, reason: String },
    /// The mesh is not a closed, consistently oriented 2-manifold.
    Topology(String),
    /// A parameter is out of its admissible range.
    Parameter(String),
    /// A point coincides with a tweezer center; the force direction is undefined.
    SingularDistance { vertex: usize },
    /// The saddle-point factorization failed.
    SingularSystem(String),
    /// The time integration produced non-finite or degenerate data.
    Instability(String),
    /// The remesher could not reach the quality targets.
    RemeshFailure { passes: usize, report: QualityReport },
    /// A stable/unstable bracket could not be established.
    SearchFailure(String),
    /// ODE integration failed.
    Integration(String),
    /// Configuration file could not be parsed or validated.
    Config(String),
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidElement { element, reason } => {
                write!(f, "invalid element {element}: {reason}")
            }
            Error::Topology(msg) => write!(f, "topology error: {msg}"),
            Error::Parameter(msg) => write!(f, "parameter error: {msg}"),
            Error::SingularDistance { vertex } => {
                write!(f, "vertex {vertex} coincides with a tweezer center")
            }
            Error::SingularSystem(msg) => write!(f, "singular system: {msg}"),
            Error::Instability(msg) => write!(f, "numerical instability: {msg}"),
            Error::RemeshFailure { passes, report } => write!(
                f,
                "remesh failed after {passes} passes (Q_shape={:.3}, Q_size={:.3})",
                report.shape_min, report.size_min
            ),
            Error::SearchFailure(msg) => write!(f, "stability search failed: {msg}"),
            Error::Integration(msg) => write!(f, "integration error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
