//! The τ-function, Weyl disks and half-planes, and the m-coefficient.
//!
//! With `U(c, λ) = [[A, C], [B, D]]` (columns `φ`, `ψ`) the boundary condition
//! `(cos β, sin β)·(φ + mψ)(c) = 0` gives `m = −(Az + B)/(Cz + D)` with
//! `z = cot β`. As `β` runs through `[0, π)` these values trace the boundary
//! of a disk, or a horizontal line when `‖ψ‖_c = 0`.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{j_form, ln_abs, Mat2, Vec2, C64, I, ZERO};
use crate::problem::Problem;
use crate::propagator::{
    bad_points, eta_direction, fundamental_matrix_on, PropagationError, Sample, Sweep,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeylError {
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error("the spectral parameter must be non-real, got {0}")]
    RealLambda(C64),
    #[error("U(c, lambda) is not invertible at c = {c}")]
    DegenerateU { c: f64 },
    #[error("psi has zero norm on (0, {c}); the Weyl set is a half-plane")]
    DegenerateHalfPlane { c: f64 },
    #[error("Lagrange norm has imaginary part {imag} relative to {value}")]
    NonRealResult { value: f64, imag: f64 },
}

/// `τ(x, λ)` split into the atom product and the continuous factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauSample {
    pub x: f64,
    pub product: C64,
    pub continuous_factor: C64,
    pub tau: C64,
    /// `ln τ`, finite even where `τ` itself under- or overflows.
    pub log_tau: C64,
}

impl TauSample {
    pub fn from_sample(s: &Sample) -> TauSample {
        let log_factor = 2.0 * I * s.continuous_integral;
        TauSample {
            x: s.x,
            product: s.log_atom_product.exp(),
            continuous_factor: log_factor.exp(),
            tau: s.log_tau().exp(),
            log_tau: s.log_tau(),
        }
    }
}

/// `τ(x, λ)` at each point of an increasing grid.
pub fn tau_on(p: &Problem, lambda: C64, grid: &[f64]) -> Result<Vec<TauSample>, WeylError> {
    bad_points(p, lambda).into_result()?;
    let fm = fundamental_matrix_on(p, lambda, grid)?;
    Ok(fm.samples.iter().map(TauSample::from_sample).collect())
}

pub fn tau(p: &Problem, lambda: C64, x: f64) -> Result<TauSample, WeylError> {
    Ok(tau_on(p, lambda, &[x])?[0])
}

/// A point of the extended complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MValue {
    Finite(C64),
    Infinity,
}

impl MValue {
    pub fn finite(self) -> Option<C64> {
        match self {
            MValue::Finite(z) => Some(z),
            MValue::Infinity => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "branch", rename_all = "lowercase")]
pub enum WeylShape {
    Disk {
        #[serde(serialize_with = "crate::classify::serialize_complex")]
        center: C64,
        radius: f64,
        log_radius: f64,
    },
    #[serde(rename = "halfplane")]
    HalfPlane {
        /// The boundary line `Im m = im_level`.
        im_level: f64,
        /// Sign of `Im λ`; the set is `{m : orientation·(Im m − im_level) ≥ 0}`.
        orientation: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylSet {
    pub c: f64,
    pub lambda: C64,
    pub shape: WeylShape,
    /// `U(c, λ)` as `exp(log_scale)·entries`.
    pub entries: Mat2,
    pub log_scale: f64,
    /// `A·conj(D) − B·conj(C)`, which is 1 on the half-plane branch.
    pub rho: C64,
}

impl WeylSet {
    pub fn is_disk(&self) -> bool {
        matches!(self.shape, WeylShape::Disk { .. })
    }

    /// Whether `m` lies in the closed disk or half-plane, with relative slack.
    pub fn contains(&self, m: C64, slack: f64) -> bool {
        match self.shape {
            WeylShape::Disk { center, radius, .. } => (m - center).norm() <= radius * (1.0 + slack),
            WeylShape::HalfPlane {
                im_level,
                orientation,
            } => orientation * (m.im - im_level) >= -slack * (1.0 + im_level.abs()),
        }
    }
}

/// The threshold below which `‖ψ‖²_c` counts as zero.
pub fn null_tolerance(w_mass: f64) -> f64 {
    1e-10 * (1.0 + w_mass)
}

fn require_nonreal(lambda: C64) -> Result<(), WeylError> {
    if lambda.im == 0.0 {
        Err(WeylError::RealLambda(lambda))
    } else {
        Ok(())
    }
}

/// The Weyl disk or half-plane at the continuity point `s.x`.
pub fn weyl_set(s: &Sample, lambda: C64) -> Result<WeylSet, WeylError> {
    require_nonreal(lambda)?;
    let c = s.x;
    if !(s.log_det.re > f64::NEG_INFINITY) || !s.u.mantissa.is_finite() {
        return Err(WeylError::DegenerateU { c });
    }
    let m = s.u.mantissa;
    let (a, b, cc, d) = (m[(0, 0)], m[(1, 0)], m[(0, 1)], m[(1, 1)]);
    let log_scale = s.u.log_scale;
    let rho_hat = a * d.conj() - b * cc.conj();
    let rho = rho_hat * (2.0 * log_scale).exp();
    let psi_norm = s.psi_norm_sq();
    let shape = if psi_norm <= null_tolerance(s.w_mass) {
        WeylShape::HalfPlane {
            im_level: (a * b.conj()).im * (2.0 * log_scale).exp(),
            orientation: lambda.im.signum(),
        }
    } else {
        let psi_j_psi = cc * d.conj() - cc.conj() * d;
        if psi_j_psi == ZERO {
            return Err(WeylError::DegenerateU { c });
        }
        let center = (b * cc.conj() - a * d.conj()) / psi_j_psi;
        let log_radius = s.log_det.re - 2.0 * log_scale - ln_abs(psi_j_psi);
        WeylShape::Disk {
            center,
            radius: log_radius.exp(),
            log_radius,
        }
    };
    Ok(WeylSet {
        c,
        lambda,
        shape,
        entries: m,
        log_scale,
        rho,
    })
}

/// Propagates to `c` and returns the Weyl set there.
pub fn weyl_set_at(p: &Problem, lambda: C64, c: f64) -> Result<WeylSet, WeylError> {
    require_nonreal(lambda)?;
    bad_points(p, lambda).into_result()?;
    let s = Sweep::new(p, lambda).advance_to(c)?;
    weyl_set(&s, lambda)
}

/// `ln r` from the Lagrange identity: `|τ| / (2|Im λ| ‖ψ‖²_c)`.
pub fn log_radius_lagrange(s: &Sample, lambda: C64) -> f64 {
    s.log_tau().re - (2.0 * lambda.im.abs()).ln() - s.log_psi_norm_sq()
}

/// `|r_geometric − r_lagrange| / r_geometric` at the sample point.
pub fn radius_residual(s: &Sample, lambda: C64) -> Result<f64, WeylError> {
    let set = weyl_set(s, lambda)?;
    match set.shape {
        WeylShape::Disk { log_radius, .. } => {
            Ok((log_radius_lagrange(s, lambda) - log_radius).exp_m1().abs())
        }
        WeylShape::HalfPlane { .. } => Err(WeylError::DegenerateHalfPlane { c: s.x }),
    }
}

pub fn radius_identity_residual(p: &Problem, lambda: C64, c: f64) -> Result<f64, WeylError> {
    require_nonreal(lambda)?;
    bad_points(p, lambda).into_result()?;
    let s = Sweep::new(p, lambda).advance_to(c)?;
    radius_residual(&s, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMethod {
    Quadrature,
    Lagrange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormValue {
    pub c: f64,
    pub value: f64,
    pub method: NormMethod,
}

/// `‖u‖²_c` for the solution `u = U·v` with coefficient vector `v`,
/// from the accumulated Gram matrix (densities plus balanced atom terms).
pub fn norm_quadrature(s: &Sample, coefficients: &Vec2) -> NormValue {
    let g = s.gram.mantissa;
    let gv = g.mul_vec(coefficients);
    let q = (coefficients[0].conj() * gv[0] + coefficients[1].conj() * gv[1]).re;
    NormValue {
        c: s.x,
        value: q.max(0.0) * s.gram.log_scale.exp(),
        method: NormMethod::Quadrature,
    }
}

/// `‖χ_m‖²_c` for `χ_m = φ + mψ`.
pub fn chi_norm_sq(s: &Sample, m: C64) -> f64 {
    norm_quadrature(s, &[C64::from(1.0), m]).value
}

/// `((u*Ju)(c) − (u*Ju)(0)) / (2i Im λ)` for a solution with values `u0`
/// at 0 and `uc` at the continuity point `c`.
pub fn norm_lagrange(u0: &Vec2, uc: &Vec2, lambda: C64, c: f64) -> Result<NormValue, WeylError> {
    require_nonreal(lambda)?;
    let z = (j_form(uc, uc) - j_form(u0, u0)) / (2.0 * I * lambda.im);
    let scale = j_form(uc, uc).norm() + j_form(u0, u0).norm();
    if z.im.abs() > 1e-8 * (z.re.abs() + scale / (2.0 * lambda.im.abs())).max(f64::MIN_POSITIVE) {
        return Err(WeylError::NonRealResult {
            value: z.re,
            imag: z.im,
        });
    }
    Ok(NormValue {
        c,
        value: z.re,
        method: NormMethod::Lagrange,
    })
}

/// `m = −(A cos β + B sin β)/(C cos β + D sin β)`.
pub fn m_from_boundary(s: &Sample, beta: f64) -> MValue {
    m_from_matrix(&s.u.mantissa, beta)
}

pub fn m_from_matrix(u: &Mat2, beta: f64) -> MValue {
    let (sn, cs) = beta.sin_cos();
    let (a, b, c, d) = (u[(0, 0)], u[(1, 0)], u[(0, 1)], u[(1, 1)]);
    let num = a * cs + b * sn;
    let den = c * cs + d * sn;
    let tiny = 1e-300 + f64::EPSILON * f64::EPSILON * (num.norm() + den.norm());
    if den.norm() <= tiny {
        MValue::Infinity
    } else {
        MValue::Finite(-num / den)
    }
}

/// The m-coefficient from the backward solution `η` with
/// `η(c) = (−sin β, cos β)`.
pub fn m_alt(p: &Problem, lambda: C64, c: f64, beta: f64) -> Result<MValue, WeylError> {
    let (eta, _) = eta_direction(p, lambda, c, beta)?;
    let (sa, ca) = p.alpha.sin_cos();
    let num = eta[1] * ca - eta[0] * sa;
    let den = eta[1] * sa + eta[0] * ca;
    Ok(if den.norm() <= 1e-300 + 1e-30 * num.norm() {
        MValue::Infinity
    } else {
        MValue::Finite(num / den)
    })
}

/// `v(x) = τ(x, λ̄)·conj(u(x))` at each grid point, for the solution `u` of
/// the λ-equation with `u(0) = u0`. The result solves the λ̄-equation with
/// `v(0) = conj(u0)`.
pub fn conjugate_solution(
    p: &Problem,
    lambda: C64,
    u0: &Vec2,
    grid: &[f64],
) -> Result<Vec<(f64, Vec2)>, WeylError> {
    bad_points(p, lambda).into_result()?;
    bad_points(p, lambda.conj()).into_result()?;
    let forward = fundamental_matrix_on(p, lambda, grid)?;
    let conj_tau = tau_on(p, lambda.conj(), grid)?;
    let coeff = p.initial_matrix().transpose().mul_vec(u0);
    Ok(forward
        .samples
        .iter()
        .zip(&conj_tau)
        .map(|(s, t)| {
            let u = s.value().mul_vec(&coeff);
            (s.x, [t.tau * u[0].conj(), t.tau * u[1].conj()])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use crate::problem::{builtin_example, CoefficientMeasure, HermitianDensity};
    use crate::propagator::fundamental_matrix;

    fn sample(name: &str, lambda: C64, c: f64) -> (Problem, Sample) {
        let (p, _) = builtin_example(name).unwrap();
        let s = *fundamental_matrix(&p, lambda, c).unwrap().last();
        (p, s)
    }

    #[test]
    fn tau_of_real_problems_is_one() {
        let (p, _) = builtin_example("free_identity").unwrap();
        let t = tau(&p, C64::new(0.3, 2.0), 3.0).unwrap();
        assert!((t.tau - ONE).norm() < 1e-12);
    }

    #[test]
    fn tau_closed_forms() {
        let (lm, _) = builtin_example("lesch_malamud(a=1)").unwrap();
        let t = tau(&lm, I, 2.0).unwrap();
        assert!((t.tau - C64::from((-4.0f64).exp())).norm() < 1e-10 * (-4.0f64).exp());
        let (cw, _) = builtin_example("constant_w").unwrap();
        let lambda = C64::new(0.5, -0.25);
        let t = tau(&cw, lambda, 1.5).unwrap();
        let exact = (2.0 * I * lambda * 1.5).exp();
        assert!((t.tau - exact).norm() < 1e-10 * exact.norm());
        assert_eq!(t.product, ONE);
    }

    #[test]
    fn tau_refuses_bad_lambda() {
        let (p, _) = builtin_example("bad_point_minus").unwrap();
        assert!(matches!(
            tau(&p, 2.0 * I, 2.0),
            Err(WeylError::Propagation(PropagationError::BadPoint(_)))
        ));
        let t = tau(&p, I, 2.0).unwrap();
        assert!((t.product - I / C64::new(0.0, -3.0)).norm() < 1e-15);
    }

    #[test]
    fn rotation_gives_half_plane_at_zero() {
        let w = CoefficientMeasure::new(HermitianDensity::identity(), vec![]);
        let p = Problem::new(1.0, 0.4, CoefficientMeasure::zero(), w).unwrap();
        let s = *fundamental_matrix(&p, I, 0.0).unwrap().last();
        let set = weyl_set(&s, I).unwrap();
        match set.shape {
            WeylShape::HalfPlane { im_level, .. } => assert_eq!(im_level, 0.0),
            _ => panic!("expected a half-plane"),
        }
        assert!((set.rho - ONE).norm() < 1e-15);
    }

    #[test]
    fn constant_w_radius() {
        let (_, s) = sample("constant_w", I, 1.0);
        let set = weyl_set(&s, I).unwrap();
        let e = std::f64::consts::E;
        let expected = 4.0 * e.powi(-2) / (e.powi(2) - e.powi(-6));
        match set.shape {
            WeylShape::Disk { radius, .. } => assert!((radius - expected).abs() < 1e-9 * expected),
            _ => panic!("expected a disk"),
        }
    }

    #[test]
    fn free_identity_radius() {
        for c in [0.5, 2.0] {
            let (_, s) = sample("free_identity", I, c);
            let set = weyl_set(&s, I).unwrap();
            let expected = 1.0 / (2.0 * c).sinh();
            match set.shape {
                WeylShape::Disk { radius, .. } => {
                    assert!((radius - expected).abs() < 1e-9 * expected)
                }
                _ => panic!("expected a disk"),
            }
            assert!(radius_residual(&s, I).unwrap() < 1e-9);
        }
    }

    #[test]
    fn norms_from_quadrature_and_lagrange() {
        let (p, s) = sample("constant_w", I, 2.0);
        let exact = ((4.0f64).exp() - (-12.0f64).exp()) / 8.0;
        let q = norm_quadrature(&s, &[ZERO, ONE]);
        assert!((q.value - exact).abs() < 1e-8 * exact);
        let psi0 = p.initial_matrix().column(1);
        let l = norm_lagrange(&psi0, &s.psi(), I, 2.0).unwrap();
        assert!((l.value - exact).abs() < 1e-8 * exact);
        let still = norm_lagrange(&[ONE, I], &[ONE, I], C64::new(1.0, 1.0), 1.0).unwrap();
        assert!(still.value.abs() < 1e-15);
    }

    #[test]
    fn boundary_values_lie_on_the_circle() {
        let lambda = C64::new(0.3, 0.8);
        let (_, s) = sample("lesch_malamud(a=1)", lambda, 1.7);
        let set = weyl_set(&s, lambda).unwrap();
        let WeylShape::Disk { center, radius, .. } = set.shape else {
            panic!("expected a disk")
        };
        for k in 0..10 {
            let beta = 0.3 * k as f64;
            let m = m_from_boundary(&s, beta).finite().unwrap();
            assert!(((m - center).norm() - radius).abs() < 1e-8 * radius);
            let chi = chi_norm_sq(&s, m);
            assert!((chi - m.im / lambda.im).abs() < 1e-7 * chi);
        }
    }

    #[test]
    fn identity_boundary_values() {
        for beta in [0.2, 1.0, 2.5] {
            let m = m_from_matrix(&Mat2::IDENTITY, beta).finite().unwrap();
            assert!((m + 1.0 / beta.tan()).norm() < 1e-14);
        }
        let u = Mat2::real(1.0, 0.0, 0.0, 0.0);
        assert_eq!(m_from_matrix(&u, 0.0), MValue::Infinity);
    }

    #[test]
    fn bad_point_m_values() {
        let (minus, s) = sample("bad_point_minus", 2.0 * I, 2.0);
        for k in 0..8 {
            let m = m_from_boundary(&s, 0.37 * k as f64).finite().unwrap();
            assert!((m - C64::new(1.0, 1.0)).norm() < 1e-12);
        }
        let (plus, _) = builtin_example("bad_point_plus").unwrap();
        for k in 0..8 {
            let m = m_alt(&plus, 2.0 * I, 2.0, 0.37 * k as f64).unwrap().finite().unwrap();
            assert!((m - C64::new(1.0, 1.0)).norm() < 1e-12);
        }
        assert!(m_alt(&minus, 2.0 * I, 2.0, 0.1).is_err());
    }

    #[test]
    fn alternative_m_agrees_without_atoms() {
        let (p, s) = sample("lesch_malamud(a=1)", C64::new(-0.4, 1.1), 2.2);
        for beta in [0.0, 0.9, 2.0] {
            let a = m_from_boundary(&s, beta).finite().unwrap();
            let b = m_alt(&p, C64::new(-0.4, 1.1), 2.2, beta).unwrap().finite().unwrap();
            assert!((a - b).norm() < 1e-8 * a.norm().max(1.0));
        }
        let (free, _) = builtin_example("free_identity").unwrap();
        let m = m_alt(&free, I, 0.0, 0.7).unwrap().finite().unwrap();
        assert!((m + 1.0 / 0.7f64.tan()).norm() < 1e-14);
    }

    #[test]
    fn conjugate_solution_solves_conjugate_equation() {
        let (p, _) = builtin_example("lesch_malamud(a=1)").unwrap();
        let lambda = C64::new(0.6, 0.9);
        let u0 = [C64::new(1.0, 0.5), C64::new(-0.2, 0.3)];
        let grid = [0.5, 1.0, 2.0];
        let v = conjugate_solution(&p, lambda, &u0, &grid).unwrap();
        let direct = fundamental_matrix_on(&p, lambda.conj(), &grid).unwrap();
        let v0 = [u0[0].conj(), u0[1].conj()];
        for ((x, vx), s) in v.iter().zip(&direct.samples) {
            let d = s.value().mul_vec(&v0);
            let err = (vx[0] - d[0]).norm() + (vx[1] - d[1]).norm();
            assert!(err < 1e-8 * (d[0].norm() + d[1].norm()), "x = {x}");
        }
    }

    #[test]
    fn conjugate_disks() {
        let lambda = C64::new(0.2, 0.7);
        let (_, s) = sample("constant_w", lambda, 1.3);
        let (_, t) = sample("constant_w", lambda.conj(), 1.3);
        let (a, b) = (weyl_set(&s, lambda).unwrap(), weyl_set(&t, lambda.conj()).unwrap());
        match (a.shape, b.shape) {
            (
                WeylShape::Disk { center: c1, radius: r1, .. },
                WeylShape::Disk { center: c2, radius: r2, .. },
            ) => {
                assert!((c1 - c2.conj()).norm() < 1e-9 * c1.norm());
                assert!((r1 - r2).abs() < 1e-9 * r1);
            }
            _ => panic!("expected disks"),
        }
    }

    #[test]
    fn unperturbed_lesch_malamud_is_a_disk() {
        let (_, s) = sample("lesch_malamud(a=0)", I, 2.0);
        let exact = (1.0 - (-8.0f64).exp()) / 4.0;
        assert!((s.psi_norm_sq() - exact).abs() < 1e-9 * exact);
        assert!(weyl_set(&s, I).unwrap().is_disk());
        assert!(radius_residual(&s, I).unwrap() < 1e-8);
    }

    #[test]
    fn single_weight_atom_norm() {
        let atom = crate::problem::Atom {
            x: 1.0,
            m: Mat2::real(2.0, 0.0, 0.0, 0.0),
        };
        let w = CoefficientMeasure::new(HermitianDensity::zero(), vec![atom]);
        let p = Problem::new(2.0, 0.0, CoefficientMeasure::zero(), w).unwrap();
        let s = *fundamental_matrix(&p, I, 1.5).unwrap().last();
        let n = norm_quadrature(&s, &[ONE, ZERO]);
        assert!((n.value - 2.0).abs() < 1e-14);
        let before = *fundamental_matrix(&p, I, 0.5).unwrap().last();
        assert_eq!(norm_quadrature(&before, &[ONE, ZERO]).value, 0.0);
    }
}
