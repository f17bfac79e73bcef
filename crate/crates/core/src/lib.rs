//! Numerical laboratory for the planar Lane-Emden system
//!
//! ```text
//!   -Δu = v^p,  u > 0,  in Ω ⊂ R²,
//!   -Δv = u^q,  v > 0,  in Ω,
//!    u = v = 0          on ∂Ω,
//! ```
//!
//! with `q = p + θ` and `p → ∞`. Positive solutions concentrate at finitely
//! many points: the peak heights tend to √e, the rescaled profiles converge to
//! Liouville bubbles, each bubble carries energy 8πe, the outer field is a sum
//! of Green functions with weight 8π√e, and the concentration points are
//! stationary for the Kirchhoff-Routh function. This crate computes solution
//! families and measures every one of those limits at finite `p`:
//!
//! * [`liouville`] — closed-form bubble profiles, masses, residuals, fitting;
//! * [`radial`] — shooting/continuation solver on the unit disk in log-radius,
//!   the engine that reaches `p = 400` and beyond;
//! * [`domain`] / [`mesh`] / [`fem`] — polygonal domains, graded Delaunay
//!   meshes, and a P1 Newton/continuation solver for general domains;
//! * [`greens`] — Green function, Robin function and the concentration-point
//!   stationarity system (closed form on the disk, FEM-backed elsewhere);
//! * [`asymptotics`] — peak detection, profile rescaling, decay and Pohozaev
//!   audits, outer-field and stationarity checks, 1/p extrapolation;
//! * [`driver`] — batch pipeline: config, reports, CSV emission, verdicts.

pub mod asymptotics;
pub mod domain;
pub mod driver;
pub mod error;
pub mod extrapolate;
pub mod fem;
pub mod geom;
pub mod greens;
pub mod liouville;
pub mod mesh;
pub mod quad;
pub mod radial;

pub use error::{Error, Result};
pub use geom::Point;

/// √e, the limiting peak height of Theorem-type concentration.
pub const SQRT_E: f64 = 1.6487212707001282;
/// 8πe, the per-peak energy quantum.
pub const EIGHT_PI_E: f64 = 8.0 * std::f64::consts::PI * std::f64::consts::E;
/// 8π√e, the outer-field Green weight per peak.
pub const EIGHT_PI_SQRT_E: f64 = 8.0 * std::f64::consts::PI * SQRT_E;
