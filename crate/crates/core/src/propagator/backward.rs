//! Backward propagation of the solution `η` with a boundary condition at `c`.

use super::ac::{integrate_smooth, knots_between};
use super::integrator::Tolerances;
use super::jump::jump_matrices;
use super::PropagationError;
use crate::linalg::{vec_norm, Vec2, C64};
use crate::problem::Problem;

/// `η(0, λ)` for the solution with `η(c, λ) = (−sin β, cos β)`, as a unit
/// vector together with the natural logarithm of its length.
pub fn eta_direction(
    p: &Problem,
    lambda: C64,
    c: f64,
    beta: f64,
) -> Result<(Vec2, f64), PropagationError> {
    if !(c >= 0.0 && c < p.b) || p.has_atom_at(c) {
        return Err(PropagationError::InvalidPoint { x: c });
    }
    let tol = Tolerances::default();
    let (s, co) = beta.sin_cos();
    let mut v: Vec2 = [C64::from(-s), C64::from(co)];
    let mut log_len = 0.0;
    let mut h = 0.0;
    let mut at = c;
    let renormalize = |v: &mut Vec2, log_len: &mut f64| {
        let n = vec_norm(v);
        if n > 0.0 && n.is_finite() {
            *v = [v[0] / n, v[1] / n];
            *log_len += n.ln();
        }
    };
    for j in p.jump_points().iter().rev().filter(|j| j.x < c) {
        for stop in knots_between(p, at, j.x).into_iter().chain([j.x]) {
            integrate_smooth(p, lambda, &tol, at, stop, &mut h, |st| {
                v = st.phi.mul_vec(&v);
                renormalize(&mut v, &mut log_len);
            })?;
            at = stop;
        }
        let jp = jump_matrices(&j.dq, &j.dw, lambda);
        let back = jp
            .backward_transfer()
            .ok_or(PropagationError::SingularBackwardJump { x: j.x })?;
        v = back.mul_vec(&v);
        renormalize(&mut v, &mut log_len);
    }
    for stop in knots_between(p, at, 0.0).into_iter().chain([0.0]) {
        integrate_smooth(p, lambda, &tol, at, stop, &mut h, |st| {
            v = st.phi.mul_vec(&v);
            renormalize(&mut v, &mut log_len);
        })?;
        at = stop;
    }
    if !(v[0].is_finite() && v[1].is_finite()) {
        return Err(PropagationError::NonFinite { x: 0.0 });
    }
    Ok((v, log_len))
}

/// `η(0, λ)` itself; overflows for very long intervals, where
/// [`eta_direction`] should be used.
pub fn eta_solution(p: &Problem, lambda: C64, c: f64, beta: f64) -> Result<Vec2, PropagationError> {
    let (v, log_len) = eta_direction(p, lambda, c, beta)?;
    let s = log_len.exp();
    Ok([v[0] * s, v[1] * s])
}
