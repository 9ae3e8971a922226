//! Inexact Newton iteration with a relative residual tolerance for finding
//! singularities of vector fields on Riemannian manifolds.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: exponential/logarithm maps, parallel transport, distances
//!   and spreading constants on `ℝⁿ`, `S^{n-1}` and `SPD(n)`;
//! - [`fields`]: vector-field test problems with analytic covariant
//!   derivatives, plus finite-difference validation;
//! - [`majorant`]: majorant functions and the convergence radii and
//!   tolerances they imply;
//! - [`solver`]: the inexact Newton driver and its step strategies;
//! - [`harness`]: configuration-driven experiments that check the
//!   quantitative bounds against traces and sampled points.

pub mod error;
pub mod fields;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod majorant;
pub mod solver;

pub use error::{Error, Result};
pub use fields::{MajorantHint, TangentOperator, VectorFieldProblem};
pub use geometry::{Frame, Geometry, ManifoldKind, Point, Tangent};
pub use majorant::{Majorant, RadiusQuery, RadiusReport};
pub use solver::{IterationRecord, IterationTrace, SolverConfig, StepStrategy, Termination};
