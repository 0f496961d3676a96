//! Balanced solutions of `Ju' + qu = λwu`.
//!
//! Between atoms the system is the linear ODE `u' = J(q - λw)u`, integrated
//! with an embedded Runge–Kutta pair. At an atom the left and right limits are
//! tied by `B₊u⁺ = B₋u⁻` and the balanced value is their mean.

mod ac;
mod backward;
mod gram;
mod integrator;
mod jump;
mod sweep;

pub use ac::evolve_ac;
pub use backward::{eta_direction, eta_solution};
pub use gram::{kernel_gram, KernelGram};
pub use integrator::Tolerances;
pub use jump::{
    bad_points, jump_matrices, real_jump_dichotomy, singular_tolerance, transfer_across_atom,
    BadPoint, BadPointReport, Dichotomy, DichotomyCheck, JumpPair, SingularSide,
};
pub use sweep::{
    fundamental_matrix, fundamental_matrix_on, AtomSample, FundamentalMatrix, Sample, Sweep,
};

use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagationError {
    #[error("lambda = {} lies in the bad set: {}", .0.lambda, .0.describe())]
    BadPoint(BadPointReport),
    #[error("B+ is singular at the atom x = {x}; the solution cannot be continued")]
    SingularForwardJump { x: f64 },
    #[error("B- is singular at the atom x = {x}; backward propagation is undefined")]
    SingularBackwardJump { x: f64 },
    #[error("step size underflow at x = {x}")]
    StepUnderflow { x: f64 },
    #[error("density evaluation failed at x = {x}: {source}")]
    Density {
        x: f64,
        #[source]
        source: ExprError,
    },
    #[error("evaluation point {x} must satisfy 0 <= x < b and avoid atoms")]
    InvalidPoint { x: f64 },
    #[error("propagation produced non-finite values at x = {x}")]
    NonFinite { x: f64 },
}
