//! Integration of the absolutely continuous part between atoms.
//!
//! Each accepted step integrates, from the identity, the step propagator `Φ`
//! together with `∫Φ*wΦ`, `∫(Im q₁₂ − λ Im w₁₂)` and `∫tr w`. Callers compose
//! the step propagators, so solutions of any size can be carried in scaled
//! form while every step stays well conditioned.

use super::integrator::{combine_errors, dop853_step, next_step, Tolerances};
use super::PropagationError;
use crate::linalg::{Mat2, ScaledMat, Vec2, C64, ONE, ZERO};
use crate::problem::Problem;

const N: usize = 10;
const MAX_STEPS: usize = 20_000_000;

/// The result of one accepted step over `[from, to]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepIncrement {
    pub to: f64,
    pub phi: Mat2,
    /// `∫ Φ* w Φ` over the step (Hermitian).
    pub gram: Mat2,
    pub theta: C64,
    pub mass: f64,
}

fn pack_identity() -> [C64; N] {
    let mut y = [ZERO; N];
    y[0] = ONE;
    y[3] = ONE;
    y
}

fn mat(y: &[C64; N], offset: usize) -> Mat2 {
    Mat2::new(y[offset], y[offset + 1], y[offset + 2], y[offset + 3])
}

/// Moves `x` strictly inside `[lo, hi]`, so that densities with jumps or
/// integrable singularities at the ends are sampled from the inside.
fn interior(x: f64, lo: f64, hi: f64) -> f64 {
    let lo_in = if lo == 0.0 {
        f64::MIN_POSITIVE
    } else {
        lo + 4.0 * f64::EPSILON * lo.abs()
    };
    let hi_in = if hi.is_finite() {
        hi - 4.0 * f64::EPSILON * hi.abs()
    } else {
        f64::INFINITY
    };
    if lo_in > hi_in {
        0.5 * (lo + hi)
    } else {
        x.clamp(lo_in, hi_in)
    }
}

struct System<'a> {
    p: &'a Problem,
    lambda: C64,
    lo: f64,
    hi: f64,
}

impl System<'_> {
    fn rhs(&self, x: f64, y: &[C64; N]) -> Result<[C64; N], PropagationError> {
        let xe = interior(x, self.lo, self.hi);
        let (q, w) = self
            .p
            .densities(xe)
            .map_err(|source| PropagationError::Density { x: xe, source })?;
        let gen = Mat2::J * (q - w.scale(self.lambda));
        let phi = mat(y, 0);
        let d_phi = gen * phi;
        let d_gram = phi.adjoint() * w * phi;
        let mut out = [ZERO; N];
        out[..4].copy_from_slice(&[d_phi[(0, 0)], d_phi[(0, 1)], d_phi[(1, 0)], d_phi[(1, 1)]]);
        out[4..8].copy_from_slice(&[
            d_gram[(0, 0)],
            d_gram[(0, 1)],
            d_gram[(1, 0)],
            d_gram[(1, 1)],
        ]);
        out[8] = C64::from(q[(0, 1)].im) - self.lambda * w[(0, 1)].im;
        out[9] = w.trace();
        Ok(out)
    }
}

/// Error ratio with one scale per block (`Φ`, Gram, `θ`, mass).
fn error_ratio(y: &[C64; N], e5: &[C64; N], e3: &[C64; N], tol: &Tolerances) -> f64 {
    let blocks: [std::ops::Range<usize>; 4] = [0..4, 4..8, 8..9, 9..10];
    let (mut n5, mut n3): (f64, f64) = (0.0, 0.0);
    for r in blocks {
        let scale = y[r.clone()].iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !scale.is_finite() {
            return f64::INFINITY;
        }
        let denom = tol.atol + tol.rtol * scale;
        for i in r {
            n5 = n5.max(e5[i].norm() / denom);
            n3 = n3.max(e3[i].norm() / denom);
        }
    }
    let ratio = combine_errors(n5, n3);
    if ratio.is_finite() {
        ratio
    } else {
        f64::INFINITY
    }
}

/// Integrates the smooth system from `from` to `to` (either direction). The
/// open interval between them must not contain atoms or density breaks. `h`
/// carries the step-size suggestion between calls.
pub(crate) fn integrate_smooth(
    p: &Problem,
    lambda: C64,
    tol: &Tolerances,
    from: f64,
    to: f64,
    h: &mut f64,
    mut on_step: impl FnMut(&StepIncrement),
) -> Result<(), PropagationError> {
    if from == to {
        return Ok(());
    }
    let sys = System {
        p,
        lambda,
        lo: from.min(to),
        hi: from.max(to),
    };
    let dir = (to - from).signum();
    let mut rhs = |x: f64, y: &[C64; N]| sys.rhs(x, y);
    if !(*h > 0.0) {
        *h = 1e-3;
    }
    let mut x = from;
    let mut steps = 0usize;
    while (to - x) * dir > 0.0 {
        let remaining = (to - x).abs();
        let mut size = h.min(remaining);
        if remaining <= 1.05 * size {
            size = remaining;
        }
        loop {
            steps += 1;
            let y0 = pack_identity();
            let (y, e5, e3) = dop853_step(&mut rhs, x, dir * size, &y0)?;
            let ratio = error_ratio(&y, &e5, &e3, tol);
            if ratio <= 1.0 {
                let last = size >= remaining;
                let next = if last { to } else { x + dir * size };
                let gram = mat(&y, 4);
                on_step(&StepIncrement {
                    to: next,
                    phi: mat(&y, 0),
                    gram: (gram + gram.adjoint()).scale_real(0.5),
                    theta: y[8],
                    mass: y[9].re,
                });
                let proposed = next_step(size, ratio);
                *h = if last { h.max(proposed) } else { proposed };
                x = next;
                break;
            }
            size = if ratio.is_finite() {
                next_step(size, ratio)
            } else {
                0.2 * size
            };
            let floor = 8.0 * f64::EPSILON * x.abs().max(1e-290);
            if size < floor || steps > MAX_STEPS {
                return Err(PropagationError::StepUnderflow { x });
            }
        }
    }
    Ok(())
}

/// Knots (atoms and density breaks) strictly between `a` and `b`, ordered in
/// the direction of travel.
pub(crate) fn knots_between(p: &Problem, a: f64, b: f64) -> Vec<f64> {
    let (lo, hi) = (a.min(b), a.max(b));
    let mut ks: Vec<f64> = p
        .jump_points()
        .iter()
        .map(|j| j.x)
        .chain(p.breaks().iter().copied())
        .filter(|&k| k > lo && k < hi)
        .collect();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    if a > b {
        ks.reverse();
    }
    ks
}

/// Propagates `u0` from `x0` to `x1` through the absolutely continuous part
/// only. No atom may lie strictly between `x0` and `x1`.
pub fn evolve_ac(
    p: &Problem,
    lambda: C64,
    x0: f64,
    x1: f64,
    u0: &Vec2,
) -> Result<Vec2, PropagationError> {
    let (lo, hi) = (x0.min(x1), x0.max(x1));
    if !(lo >= 0.0 && hi <= p.b) {
        return Err(PropagationError::InvalidPoint { x: hi });
    }
    if let Some(j) = p.jump_points().iter().find(|j| j.x > lo && j.x < hi) {
        return Err(PropagationError::InvalidPoint { x: j.x });
    }
    let tol = Tolerances::default();
    let mut total = ScaledMat::new(Mat2::IDENTITY);
    let mut h = 0.0;
    let mut at = x0;
    for stop in knots_between(p, x0, x1).into_iter().chain([x1]) {
        integrate_smooth(p, lambda, &tol, at, stop, &mut h, |s| {
            total.mantissa = s.phi * total.mantissa;
            total.normalize();
        })?;
        at = stop;
    }
    let v = total.value().mul_vec(u0);
    if !(v[0].is_finite() && v[1].is_finite()) {
        return Err(PropagationError::NonFinite { x: x1 });
    }
    Ok(v)
}
