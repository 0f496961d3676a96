//! Reference computations for differential testing: a fixed-step
//! integrator with no error control or rescaling, and evaluation of the
//! catalog's closed forms.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{Mat2, ScaledMat, C64, ZERO};
use crate::problem::{ClosedFormRecord, Problem};
use crate::propagator::{
    jump_matrices, AtomSample, FundamentalMatrix, PropagationError, Sample,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error("invalid oracle step {step}: {reason}")]
    InvalidStep { step: f64, reason: String },
    #[error("{quantity} has no closed form for {entry}")]
    Unavailable { quantity: String, entry: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    Midpoint,
    Rk4Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleConfig {
    pub step: f64,
    pub method: OracleMethod,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            step: 1e-4,
            method: OracleMethod::Rk4Fixed,
        }
    }
}

impl OracleConfig {
    /// The step must be positive and at most a tenth of the smallest gap
    /// between atoms.
    pub fn validate(&self, p: &Problem) -> Result<(), OracleError> {
        let bad = |reason: String| {
            Err(OracleError::InvalidStep {
                step: self.step,
                reason,
            })
        };
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad("must be positive".into());
        }
        let xs: Vec<f64> = p.jump_points().iter().map(|j| j.x).collect();
        let gap = xs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if self.step > gap / 10.0 {
            return bad(format!("exceeds a tenth of the atom gap {gap}"));
        }
        Ok(())
    }
}

/// `[U, ∫U*wU, ∫(Im q₁₂ − λ Im w₁₂), ∫tr w]`.
#[derive(Debug, Clone, Copy)]
struct State {
    u: Mat2,
    gram: Mat2,
    theta: C64,
    mass: f64,
}

impl State {
    fn axpy(&self, h: f64, k: &State) -> State {
        State {
            u: self.u + k.u.scale_real(h),
            gram: self.gram + k.gram.scale_real(h),
            theta: self.theta + h * k.theta,
            mass: self.mass + h * k.mass,
        }
    }
}

fn rhs(p: &Problem, lambda: C64, x: f64, s: &State) -> Result<State, PropagationError> {
    let (q, w) = p
        .densities(x)
        .map_err(|source| PropagationError::Density { x, source })?;
    let generator = Mat2::J * (q - w.scale(lambda));
    Ok(State {
        u: generator * s.u,
        gram: s.u.adjoint() * w * s.u,
        theta: q[(0, 1)].im - lambda * w[(0, 1)].im,
        mass: w.trace().re,
    })
}

fn step(
    p: &Problem,
    lambda: C64,
    method: OracleMethod,
    x: f64,
    h: f64,
    lo: f64,
    hi: f64,
    s: &State,
) -> Result<State, PropagationError> {
    // Densities are sampled strictly inside the smooth piece.
    let inside = |t: f64| {
        let pad = 1e-12 * (hi - lo);
        t.clamp(lo + pad, hi - pad)
    };
    let f = |t: f64, y: &State| rhs(p, lambda, inside(t), y);
    Ok(match method {
        OracleMethod::Midpoint => {
            let k1 = f(x, s)?;
            let k2 = f(x + 0.5 * h, &s.axpy(0.5 * h, &k1))?;
            s.axpy(h, &k2)
        }
        OracleMethod::Rk4Fixed => {
            let k1 = f(x, s)?;
            let k2 = f(x + 0.5 * h, &s.axpy(0.5 * h, &k1))?;
            let k3 = f(x + 0.5 * h, &s.axpy(0.5 * h, &k2))?;
            let k4 = f(x + h, &s.axpy(h, &k3))?;
            s.axpy(h / 6.0, &k1)
                .axpy(h / 3.0, &k2)
                .axpy(h / 3.0, &k3)
                .axpy(h / 6.0, &k4)
        }
    })
}

fn sample(x: f64, s: &State, log_atom_product: C64) -> Sample {
    Sample {
        x,
        u: ScaledMat::new(s.u),
        log_det: s.u.det().ln(),
        gram: ScaledMat::new(s.gram),
        continuous_integral: s.theta,
        log_atom_product,
        w_mass: s.mass,
    }
}

/// Fixed-step propagation to each point of an increasing grid, using the
/// same jump transfer at atoms as the adaptive propagator.
pub fn fixed_step_propagate_on(
    p: &Problem,
    lambda: C64,
    grid: &[f64],
    cfg: &OracleConfig,
) -> Result<FundamentalMatrix, OracleError> {
    cfg.validate(p)?;
    let mut knots: Vec<f64> = p
        .breaks()
        .iter()
        .copied()
        .chain(p.jump_points().iter().map(|j| j.x))
        .chain(grid.iter().copied())
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let mut state = State {
        u: p.initial_matrix(),
        gram: Mat2::ZERO,
        theta: ZERO,
        mass: 0.0,
    };
    let mut log_atom_product = ZERO;
    let mut atoms = Vec::new();
    let mut samples = Vec::with_capacity(grid.len());
    let mut x = 0.0;
    let mut jumps = p.jump_points().iter().peekable();
    let mut targets = grid.iter().peekable();
    for knot in knots {
        let Some(&&target) = targets.peek() else { break };
        if !(target >= x && target < p.b) || p.has_atom_at(target) {
            return Err(PropagationError::InvalidPoint { x: target }.into());
        }
        if knot > x {
            let n = ((knot - x) / cfg.step).ceil().max(1.0) as usize;
            let h = (knot - x) / n as f64;
            for k in 0..n {
                state = step(p, lambda, cfg.method, x + k as f64 * h, h, x, knot, &state)?;
            }
            x = knot;
        }
        while targets.peek().is_some_and(|&&t| t == x) {
            samples.push(sample(x, &state, log_atom_product));
            targets.next();
        }
        if let Some(j) = jumps.next_if(|j| j.x == x) {
            let jump = jump_matrices(&j.dq, &j.dw, lambda);
            let t = jump
                .transfer()
                .ok_or(PropagationError::SingularForwardJump { x })?;
            let minus = state.u;
            let plus = t * minus;
            let balanced = (minus + plus).scale_real(0.5);
            state.gram += balanced.adjoint() * j.dw * balanced;
            state.mass += j.dw.trace().re;
            state.u = plus;
            log_atom_product += jump.det_minus.ln() - jump.det_plus.ln();
            atoms.push(AtomSample {
                x,
                jump,
                minus,
                plus,
                balanced,
                log_scale: 0.0,
            });
        }
    }
    if let Some(&&t) = targets.peek() {
        return Err(PropagationError::InvalidPoint { x: t }.into());
    }
    Ok(FundamentalMatrix {
        lambda,
        alpha: p.alpha,
        samples,
        atoms,
    })
}

pub fn fixed_step_propagate(
    p: &Problem,
    lambda: C64,
    c: f64,
    cfg: &OracleConfig,
) -> Result<FundamentalMatrix, OracleError> {
    fixed_step_propagate_on(p, lambda, &[c], cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    FundamentalMatrix,
    Tau,
    PsiNormSq,
    TimeChange,
    LimitPointM,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFormValue {
    Matrix(Mat2),
    Complex(C64),
    Real(f64),
}

/// Evaluates a closed form of a catalog entry. `x` is the position (or
/// truncation point) and is ignored by `LimitPointM`.
pub fn closed_form_eval(
    record: &ClosedFormRecord,
    quantity: Quantity,
    x: f64,
    lambda: C64,
) -> Result<ClosedFormValue, OracleError> {
    let value = match quantity {
        Quantity::FundamentalMatrix => record
            .fundamental_matrix(x, lambda)
            .map(ClosedFormValue::Matrix),
        Quantity::Tau => record.tau(x, lambda).map(ClosedFormValue::Complex),
        Quantity::PsiNormSq => record.psi_norm_sq(x, lambda).map(ClosedFormValue::Real),
        Quantity::TimeChange => record.time_change(x).map(ClosedFormValue::Real),
        Quantity::LimitPointM => record.limit_point_m(lambda).map(ClosedFormValue::Complex),
    };
    value.ok_or_else(|| OracleError::Unavailable {
        quantity: format!("{quantity:?}"),
        entry: record.name(),
    })
}

/// Relative deviation `max|A − B| / max|B|` of two matrices.
pub fn relative_deviation(a: &Mat2, b: &Mat2) -> f64 {
    (*a - *b).max_abs() / b.max_abs().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Deviation {
    pub c: f64,
    pub fundamental_matrix: f64,
    pub gram: f64,
    pub tau: f64,
}

/// Compares adaptive samples with reference samples at the same points.
pub fn compare(adaptive: &FundamentalMatrix, reference: &FundamentalMatrix) -> Vec<Deviation> {
    adaptive
        .samples
        .iter()
        .zip(&reference.samples)
        .map(|(a, r)| Deviation {
            c: a.x,
            fundamental_matrix: relative_deviation(&a.value(), &r.value()),
            gram: relative_deviation(&a.gram_value(), &r.gram_value()),
            tau: (a.tau() - r.tau()).norm() / r.tau().norm().max(f64::MIN_POSITIVE),
        })
        .collect()
}

impl Deviation {
    pub fn worst(&self) -> f64 {
        self.fundamental_matrix.max(self.gram).max(self.tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::I;
    use crate::expr::expr;
    use crate::problem::{builtin_example, CoefficientMeasure, HermitianDensity};
    use crate::propagator::fundamental_matrix_on;

    #[test]
    fn zero_coefficients_do_not_move() {
        let later = HermitianDensity::new(expr("step(x-2)"), expr("0"), expr("step(x-2)"));
        let w = CoefficientMeasure::new(later, vec![]).with_breaks(vec![2.0]);
        let p = Problem::new(3.0, 0.3, CoefficientMeasure::zero(), w).unwrap();
        for step in [0.3, 1e-2] {
            let cfg = OracleConfig {
                step,
                method: OracleMethod::Midpoint,
            };
            let fm = fixed_step_propagate(&p, I, 1.5, &cfg).unwrap();
            assert_eq!(fm.last().value(), Mat2::rotation(0.3));
        }
    }

    #[test]
    fn free_identity_matches_exponential() {
        let (p, _) = builtin_example("free_identity").unwrap();
        let fm = fixed_step_propagate(&p, I, 1.0, &OracleConfig::default()).unwrap();
        // exp(−λJ) = cos λ · 1 − sin λ · J
        let (c, s) = (I.cos(), I.sin());
        let expected = Mat2::new(c, s, -s, c);
        assert!(relative_deviation(&fm.last().value(), &expected) < 1e-6);
    }

    #[test]
    fn lesch_malamud_matches_closed_form() {
        let (p, rec) = builtin_example("lesch_malamud(a=1)").unwrap();
        let fm = fixed_step_propagate(&p, I, 1.0, &OracleConfig::default()).unwrap();
        let exact = rec.fundamental_matrix(1.0, I).unwrap();
        assert!(relative_deviation(&fm.last().value(), &exact) < 1e-5);
    }

    #[test]
    fn halving_the_step_converges() {
        let (p, rec) = builtin_example("lesch_malamud(a=1)").unwrap();
        let exact = rec.fundamental_matrix(2.0, C64::new(0.5, 1.0)).unwrap();
        for method in [OracleMethod::Midpoint, OracleMethod::Rk4Fixed] {
            let err = |step: f64| {
                let fm = fixed_step_propagate(&p, C64::new(0.5, 1.0), 2.0, &OracleConfig { step, method })
                    .unwrap();
                relative_deviation(&fm.last().value(), &exact)
            };
            assert!(err(0.05) / err(0.025) >= 3.0, "{method:?}");
        }
    }

    #[test]
    fn agrees_with_adaptive_across_atoms() {
        let (p, _) = builtin_example("bad_point_minus").unwrap();
        let grid = [0.5, 1.5, 3.0];
        let lambda = C64::new(0.2, 0.7);
        let a = fundamental_matrix_on(&p, lambda, &grid).unwrap();
        let r = fixed_step_propagate_on(&p, lambda, &grid, &OracleConfig::default()).unwrap();
        assert_eq!(r.atoms.len(), 1);
        for d in compare(&a, &r) {
            assert!(d.worst() < 1e-6, "{d:?}");
        }
    }

    #[test]
    fn step_validation() {
        let (p, _) = builtin_example("free_identity").unwrap();
        for step in [0.0, -1.0, f64::NAN] {
            let cfg = OracleConfig {
                step,
                method: OracleMethod::Rk4Fixed,
            };
            assert!(matches!(cfg.validate(&p), Err(OracleError::InvalidStep { .. })));
        }
    }

    #[test]
    fn closed_forms() {
        let (_, cw) = builtin_example("constant_w").unwrap();
        let ClosedFormValue::Real(n) = closed_form_eval(&cw, Quantity::PsiNormSq, 2.0, I).unwrap()
        else {
            panic!()
        };
        assert!((n - ((4f64).exp() - (-12f64).exp()) / 8.0).abs() < 1e-12 * n);
        let (_, lm) = builtin_example("lesch_malamud(a=0.5)").unwrap();
        assert_eq!(
            closed_form_eval(&lm, Quantity::TimeChange, 0.0, I).unwrap(),
            ClosedFormValue::Real(0.0)
        );
        let (_, lm1) = builtin_example("lesch_malamud(a=1)").unwrap();
        let ClosedFormValue::Complex(t) = closed_form_eval(&lm1, Quantity::Tau, 1.0, I).unwrap()
        else {
            panic!()
        };
        assert!((t - C64::from((-2f64).exp())).norm() < 1e-15);
        let (_, bad) = builtin_example("bad_point_plus").unwrap();
        assert!(matches!(
            closed_form_eval(&bad, Quantity::PsiNormSq, 1.0, I),
            Err(OracleError::Unavailable { .. })
        ));
    }
}
