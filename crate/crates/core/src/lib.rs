//! Inverse kinematics and dexterous-workspace analysis for 2-segment
//! constant-curvature continuum robots with inextensible segments.
//!
//! The crate is organised around five modules:
//!
//! - [`model`]: structural parameters, configurations, poses, forward
//!   kinematics and the piecewise line-segment representation.
//! - [`vsik`]: the variable-separation solver, which reduces each IK problem
//!   to a single scalar equation in one bending angle.
//! - [`dls`]: a Jacobian damped-least-squares baseline.
//! - [`workspace`]: dexterous-workspace boundaries at a fixed position,
//!   direction classification and closest-feasible-direction search.
//! - [`harness`]: corpus generation, benchmarking and export.
//!
//! All lengths are millimetres and all angles radians.

pub mod dls;
pub mod harness;
pub mod model;
mod scalar;
pub mod vsik;
pub mod workspace;

use std::path::PathBuf;

pub use model::{
    forward_kinematics, Config, ConfigCi1, ConfigCi2, ConfigClass, LineSegmentShape, Pose,
    StructuralParams,
};
pub use vsik::{IkOutcome, IkStatus, L2Root, SolverSettings};

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("invalid structural parameters: {0}")]
    InvalidParams(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
