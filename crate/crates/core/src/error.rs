//! Error type shared by every solver and oracle in the crate.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// A scalar argument violates its precondition (non-positive λ, negative
    /// cut radius, ...).
    InvalidParameter(String),
    /// Structured input is malformed (mismatched grid shapes, bad polygon).
    InvalidInput(String),
    /// Evaluation at a singular configuration (x = y of a Green function,
    /// coincident concentration points).
    SingularEvaluation(String),
    /// Query point outside the domain, probe ball leaving the domain, peak on
    /// the boundary.
    Geometry(String),
    /// Robin-function query closer to the boundary than the difference step.
    NearBoundary { dist: f64, step: f64 },
    /// Nonlinear least squares could not determine the parameters.
    FitFailure { message: String, condition: f64 },
    /// Triangulation failed (degenerate polygon).
    MeshFailure(String),
    /// An iteration diverged; carries the residual history of the attempt.
    Divergence { message: String, history: Vec<f64> },
    /// Adaptive integrator step underflow at abscissa `s`.
    Stiffness { s: f64 },
    /// Non-finite state encountered during integration or assembly.
    Overflow(String),
    /// Linear algebra failure (singular Jacobian, factorization error).
    LinearSolve(String),
    /// Configuration parse/validation failure; names the offending field.
    Config(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(m) => write!(f, "invalid parameter: {m}"),
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::SingularEvaluation(m) => write!(f, "singular evaluation: {m}"),
            Error::Geometry(m) => write!(f, "geometry error: {m}"),
            Error::NearBoundary { dist, step } => write!(
                f,
                "point is {dist:.3e} from the boundary, closer than the difference step {step:.3e}"
            ),
            Error::FitFailure { message, condition } => {
                write!(f, "fit failure: {message} (condition {condition:.3e})")
            }
            Error::MeshFailure(m) => write!(f, "mesh generation failed: {m}"),
            Error::Divergence { message, history } => {
                write!(f, "divergence: {message} (residual history {history:?})")
            }
            Error::Stiffness { s } => {
                write!(f, "integrator step underflow at s = {s:.6}")
            }
            Error::Overflow(m) => write!(f, "non-finite state: {m}"),
            Error::LinearSolve(m) => write!(f, "linear solve failed: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
