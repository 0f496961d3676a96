//! Forward propagation of the fundamental matrix `U(·, λ)`.
//!
//! `U` is carried as `e^L·Û` with `Û` normalised, together with `ln det U`,
//! the Gram matrix `∫ U* w U` (also scaled) and the ingredients of `τ`. This
//! keeps everything finite on long intervals where the entries of `U` leave
//! the floating-point range.

use super::ac::{integrate_smooth, knots_between, StepIncrement};
use super::integrator::Tolerances;
use super::jump::{jump_matrices, JumpPair};
use super::PropagationError;
use crate::linalg::{Mat2, ScaledMat, Vec2, C64, I, ZERO};
use crate::problem::Problem;

/// The propagated state at a continuity point `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub u: ScaledMat,
    /// `ln det U(x)`, accumulated from step and jump determinants.
    pub log_det: C64,
    /// `∫_(0,x) U* w U`, balanced values at atoms.
    pub gram: ScaledMat,
    /// `∫_0^x (Im q₁₂ − λ Im w₁₂)` over the densities.
    pub continuous_integral: C64,
    /// `Σ ln(det B₋ / det B₊)` over atoms in `(0, x)`.
    pub log_atom_product: C64,
    /// Total trace of `w` over `(0, x)`.
    pub w_mass: f64,
}

impl Sample {
    fn start(p: &Problem) -> Sample {
        Sample {
            x: 0.0,
            u: ScaledMat::new(p.initial_matrix()),
            log_det: ZERO,
            gram: ScaledMat::zero(),
            continuous_integral: ZERO,
            log_atom_product: ZERO,
            w_mass: 0.0,
        }
    }

    /// `U(x)`; may overflow for large `x`.
    pub fn value(&self) -> Mat2 {
        self.u.value()
    }

    pub fn phi(&self) -> Vec2 {
        self.value().column(0)
    }

    pub fn psi(&self) -> Vec2 {
        self.value().column(1)
    }

    pub fn det(&self) -> C64 {
        self.log_det.exp()
    }

    /// `ln τ(x, λ)`: the atom product times `exp(2i ∫ ...)`.
    pub fn log_tau(&self) -> C64 {
        self.log_atom_product + 2.0 * I * self.continuous_integral
    }

    pub fn tau(&self) -> C64 {
        self.log_tau().exp()
    }

    pub fn gram_value(&self) -> Mat2 {
        self.gram.value()
    }

    /// `ln ‖ψ‖²_x`, `-∞` for a null norm.
    pub fn log_psi_norm_sq(&self) -> f64 {
        self.gram.log_scale + self.gram.mantissa[(1, 1)].re.max(0.0).ln()
    }

    pub fn log_phi_norm_sq(&self) -> f64 {
        self.gram.log_scale + self.gram.mantissa[(0, 0)].re.max(0.0).ln()
    }

    pub fn psi_norm_sq(&self) -> f64 {
        self.log_psi_norm_sq().exp()
    }

    pub fn phi_norm_sq(&self) -> f64 {
        self.log_phi_norm_sq().exp()
    }

    fn absorb(&mut self, s: &StepIncrement) {
        let m = self.u.mantissa;
        self.gram
            .add_scaled(m.adjoint() * s.gram * m, 2.0 * self.u.log_scale);
        self.u.mantissa = s.phi * m;
        self.u.normalize();
        self.log_det += s.phi.det().ln();
        self.continuous_integral += s.theta;
        self.w_mass += s.mass;
        self.x = s.to;
    }
}

/// Left, right and balanced values of `U` at an atom, sharing one scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomSample {
    pub x: f64,
    pub jump: JumpPair,
    pub minus: Mat2,
    pub plus: Mat2,
    pub balanced: Mat2,
    pub log_scale: f64,
}

impl AtomSample {
    pub fn minus_value(&self) -> Mat2 {
        self.minus.scale_real(self.log_scale.exp())
    }

    pub fn plus_value(&self) -> Mat2 {
        self.plus.scale_real(self.log_scale.exp())
    }

    pub fn balanced_value(&self) -> Mat2 {
        self.balanced.scale_real(self.log_scale.exp())
    }
}

/// Incremental forward propagation; each call to [`Sweep::advance_to`]
/// continues from the previous position.
#[derive(Debug, Clone)]
pub struct Sweep<'a> {
    p: &'a Problem,
    lambda: C64,
    tol: Tolerances,
    state: Sample,
    next_jump: usize,
    h: f64,
    atoms: Vec<AtomSample>,
}

impl<'a> Sweep<'a> {
    pub fn new(p: &'a Problem, lambda: C64) -> Self {
        Sweep::with_tolerances(p, lambda, Tolerances::default())
    }

    pub fn with_tolerances(p: &'a Problem, lambda: C64, tol: Tolerances) -> Self {
        Sweep {
            p,
            lambda,
            tol,
            state: Sample::start(p),
            next_jump: 0,
            h: 0.0,
            atoms: Vec::new(),
        }
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn current(&self) -> &Sample {
        &self.state
    }

    pub fn atoms(&self) -> &[AtomSample] {
        &self.atoms
    }

    fn smooth_to(&mut self, to: f64) -> Result<(), PropagationError> {
        let (p, lambda, tol) = (self.p, self.lambda, self.tol);
        let mut at = self.state.x;
        for stop in knots_between(p, at, to).into_iter().chain([to]) {
            let state = &mut self.state;
            integrate_smooth(p, lambda, &tol, at, stop, &mut self.h, |s| state.absorb(s))?;
            self.state.x = stop;
            at = stop;
        }
        if !self.state.u.mantissa.is_finite() || !self.state.u.log_scale.is_finite() {
            return Err(PropagationError::NonFinite { x: to });
        }
        Ok(())
    }

    fn cross_atom(&mut self) -> Result<(), PropagationError> {
        let j = self.p.jump_points()[self.next_jump];
        let jump = jump_matrices(&j.dq, &j.dw, self.lambda);
        let t = jump
            .transfer()
            .ok_or(PropagationError::SingularForwardJump { x: j.x })?;
        let s = &mut self.state;
        let minus = s.u.mantissa;
        let plus = t * minus;
        let balanced = (minus + plus).scale_real(0.5);
        self.atoms.push(AtomSample {
            x: j.x,
            jump,
            minus,
            plus,
            balanced,
            log_scale: s.u.log_scale,
        });
        s.gram
            .add_scaled(balanced.adjoint() * j.dw * balanced, 2.0 * s.u.log_scale);
        s.w_mass += j.dw.trace().re;
        let log_ratio = jump.det_minus.ln() - jump.det_plus.ln();
        s.log_det += log_ratio;
        s.log_atom_product += log_ratio;
        s.u.mantissa = plus;
        s.u.normalize();
        self.next_jump += 1;
        Ok(())
    }

    /// Propagates to the continuity point `c` (not before the current
    /// position) and returns the state there.
    pub fn advance_to(&mut self, c: f64) -> Result<Sample, PropagationError> {
        if !(c >= self.state.x && c < self.p.b) || self.p.has_atom_at(c) {
            return Err(PropagationError::InvalidPoint { x: c });
        }
        while let Some(j) = self.p.jump_points().get(self.next_jump) {
            if j.x >= c {
                break;
            }
            self.smooth_to(j.x)?;
            self.cross_atom()?;
        }
        self.smooth_to(c)?;
        Ok(self.state)
    }
}

/// Samples of `U(·, λ)` on a grid, plus the values at every atom passed.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalMatrix {
    pub lambda: C64,
    pub alpha: f64,
    pub samples: Vec<Sample>,
    pub atoms: Vec<AtomSample>,
}

impl FundamentalMatrix {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("at least one sample")
    }
}

/// Propagates to each point of an increasing grid of continuity points.
///
/// Propagation stops with [`PropagationError::SingularForwardJump`] at an atom
/// whose `B₊` is singular. A singular `B₋` is allowed: the solution continues
/// with a rank-deficient `U`.
pub fn fundamental_matrix_on(
    p: &Problem,
    lambda: C64,
    grid: &[f64],
) -> Result<FundamentalMatrix, PropagationError> {
    let mut sweep = Sweep::new(p, lambda);
    let samples = grid
        .iter()
        .map(|&c| sweep.advance_to(c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FundamentalMatrix {
        lambda,
        alpha: p.alpha,
        samples,
        atoms: sweep.atoms,
    })
}

pub fn fundamental_matrix(
    p: &Problem,
    lambda: C64,
    c: f64,
) -> Result<FundamentalMatrix, PropagationError> {
    fundamental_matrix_on(p, lambda, &[c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use crate::problem::{builtin_example, Atom, CoefficientMeasure, HermitianDensity};

    fn rel(a: Mat2, b: Mat2) -> f64 {
        (a - b).max_abs() / b.max_abs()
    }

    #[test]
    fn starts_at_rotation() {
        let w = CoefficientMeasure::new(HermitianDensity::identity(), vec![]);
        let p = Problem::new(1.0, 0.7, CoefficientMeasure::zero(), w).unwrap();
        let fm = fundamental_matrix(&p, I, 0.0).unwrap();
        assert_eq!(fm.last().value(), Mat2::rotation(0.7));
        assert_eq!(fm.last().det(), ONE);
    }

    #[test]
    fn constant_w_closed_form() {
        let (p, rec) = builtin_example("constant_w").unwrap();
        let fm = fundamental_matrix_on(&p, I, &[0.5, 1.0, 3.0]).unwrap();
        for s in &fm.samples {
            let exact = rec.fundamental_matrix(s.x, I).unwrap();
            assert!(rel(s.value(), exact) < 1e-9, "x = {}", s.x);
            let tau = rec.tau(s.x, I).unwrap();
            assert!((s.tau() - tau).norm() < 1e-9 * tau.norm());
            assert!((s.det() - tau).norm() < 1e-9 * tau.norm());
        }
    }

    #[test]
    fn bad_point_minus_is_rank_one_beyond_the_atom() {
        let (p, _) = builtin_example("bad_point_minus").unwrap();
        let fm = fundamental_matrix(&p, 2.0 * I, 2.0).unwrap();
        let s = fm.last();
        let (phi, psi) = (s.phi(), s.psi());
        let k = C64::new(-1.0, -1.0);
        assert!((phi[0] - k * psi[0]).norm() < 1e-14);
        assert!((phi[1] - k * psi[1]).norm() < 1e-14);
        assert_eq!(s.det(), ZERO);
        let a = &fm.atoms[0];
        assert_eq!(a.x, 1.0);
        let lhs = a.jump.plus * a.plus_value();
        let rhs = a.jump.minus * a.minus_value();
        assert!((lhs - rhs).max_abs() < 1e-14);
    }

    #[test]
    fn bad_point_plus_stops() {
        let (p, _) = builtin_example("bad_point_plus").unwrap();
        assert_eq!(
            fundamental_matrix(&p, 2.0 * I, 2.0).unwrap_err(),
            PropagationError::SingularForwardJump { x: 1.0 }
        );
        assert!(fundamental_matrix(&p, 2.0 * I, 0.5).is_ok());
    }

    #[test]
    fn rejects_atoms_and_backwards_grids() {
        let (p, _) = builtin_example("bad_point_minus").unwrap();
        assert!(fundamental_matrix(&p, I, 1.0).is_err());
        assert!(fundamental_matrix_on(&p, I, &[2.0, 1.5]).is_err());
    }

    #[test]
    fn atom_gram_term() {
        let w = CoefficientMeasure::new(
            HermitianDensity::zero(),
            vec![Atom {
                x: 1.0,
                m: Mat2::real(2.0, 0.0, 0.0, 0.0),
            }],
        );
        let p = Problem::new(3.0, 0.0, CoefficientMeasure::zero(), w).unwrap();
        let fm = fundamental_matrix(&p, I, 2.0).unwrap();
        let s = fm.last();
        let a = fm.atoms[0].balanced_value().column(0);
        assert!((s.phi_norm_sq() - 2.0 * a[0].norm_sqr()).abs() < 1e-14);
        assert!((s.w_mass - 2.0).abs() < 1e-15);
    }

    #[test]
    fn survives_huge_growth() {
        let (p, rec) = builtin_example("constant_w").unwrap();
        let fm = fundamental_matrix(&p, I, 2000.0).unwrap();
        let s = fm.last();
        assert!(s.u.log_scale > 1000.0);
        let tau = rec.tau(2000.0, I).unwrap().ln();
        assert!((s.log_det - s.log_tau()).norm() < 1e-6 * tau.norm());
        let exact = rec.psi_norm_sq(10.0, I).unwrap();
        let near = fundamental_matrix(&p, I, 10.0).unwrap();
        assert!((near.last().psi_norm_sq() - exact).abs() < 1e-8 * exact);
    }
}
