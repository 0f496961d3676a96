//! Numerical Weyl–Titchmarsh theory for the canonical system
//! `Ju' + qu = λwu` on `(0, b)`, where `q` and `w` are 2×2 matrix measures
//! made of an absolutely continuous density and finitely many point masses.
//!
//! The crate is organised bottom-up:
//!
//! * [`problem`] holds the coefficient model, the density expression
//!   language, JSON I/O and a catalog of examples with closed forms.
//! * [`propagator`] integrates balanced solutions across atoms.
//! * [`weyl`] computes τ, Weyl disks and half-planes and the m-coefficient.
//! * [`classify`] drives `c → b` and reports limit behaviour and deficiency
//!   indices.
//! * [`oracle`] is a naive fixed-step reference integrator for testing.

pub mod classify;
pub mod expr;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod propagator;
pub mod weyl;

pub use linalg::{Mat2, Vec2, C64};
pub use problem::{Problem, ProblemError};
