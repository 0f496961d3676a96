//! Jump conditions at atoms.

use serde::Serialize;

use super::PropagationError;
use crate::linalg::{Mat2, Vec2, C64};
use crate::problem::Problem;

/// `B± = J ± ½(Δq − λΔw)` and their determinants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpPair {
    pub minus: Mat2,
    pub plus: Mat2,
    pub det_minus: C64,
    pub det_plus: C64,
    /// Threshold below which a determinant counts as zero.
    pub tol: f64,
}

pub fn jump_matrices(dq: &Mat2, dw: &Mat2, lambda: C64) -> JumpPair {
    let half = (*dq - dw.scale(lambda)).scale_real(0.5);
    let minus = Mat2::J - half;
    let plus = Mat2::J + half;
    JumpPair {
        minus,
        plus,
        det_minus: minus.det(),
        det_plus: plus.det(),
        tol: singular_tolerance(dq, dw, lambda),
    }
}

/// `1e-12·(1 + ‖Δq‖ + |λ|‖Δw‖)²`.
pub fn singular_tolerance(dq: &Mat2, dw: &Mat2, lambda: C64) -> f64 {
    let s = 1.0 + dq.norm() + lambda.norm() * dw.norm();
    1e-12 * s * s
}

impl JumpPair {
    pub fn minus_singular(&self) -> bool {
        self.det_minus.norm() < self.tol
    }

    pub fn plus_singular(&self) -> bool {
        self.det_plus.norm() < self.tol
    }

    /// `B₊⁻¹B₋`, if `B₊` is invertible.
    pub fn transfer(&self) -> Option<Mat2> {
        if self.plus_singular() {
            return None;
        }
        Some(self.plus.inverse()? * self.minus)
    }

    /// `B₋⁻¹B₊`, mapping right limits to left limits.
    pub fn backward_transfer(&self) -> Option<Mat2> {
        if self.minus_singular() {
            return None;
        }
        Some(self.minus.inverse()? * self.plus)
    }
}

/// Returns `(u⁺, u^#)` from `u⁻`.
pub fn transfer_across_atom(
    u_minus: &Vec2,
    jp: &JumpPair,
    x: f64,
) -> Result<(Vec2, Vec2), PropagationError> {
    let t = jp
        .transfer()
        .ok_or(PropagationError::SingularForwardJump { x })?;
    let u_plus = t.mul_vec(u_minus);
    let balanced = [
        0.5 * (u_minus[0] + u_plus[0]),
        0.5 * (u_minus[1] + u_plus[1]),
    ];
    Ok((u_plus, balanced))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SingularSide {
    Minus,
    Plus,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BadPoint {
    pub x: f64,
    pub singular: SingularSide,
    pub abs_det_minus: f64,
    pub abs_det_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BadPointReport {
    #[serde(serialize_with = "crate::classify::serialize_complex")]
    pub lambda: C64,
    pub points: Vec<BadPoint>,
    pub lambda_in_bad_set: bool,
}

impl BadPointReport {
    pub fn describe(&self) -> String {
        if self.points.is_empty() {
            return "no bad points".into();
        }
        self.points
            .iter()
            .map(|b| {
                format!(
                    "x = {} (B{} singular)",
                    b.x,
                    match b.singular {
                        SingularSide::Minus => "-",
                        SingularSide::Plus => "+",
                        SingularSide::Both => "±",
                    }
                )
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn into_result(self) -> Result<(), PropagationError> {
        if self.lambda_in_bad_set {
            Err(PropagationError::BadPoint(self))
        } else {
            Ok(())
        }
    }
}

/// Scans the atoms of `p` for singular `B±`. Continuity points always have
/// `B± = J`, so only atoms can be bad.
pub fn bad_points(p: &Problem, lambda: C64) -> BadPointReport {
    bad_points_below(p, lambda, f64::INFINITY)
}

pub(crate) fn bad_points_below(p: &Problem, lambda: C64, limit: f64) -> BadPointReport {
    let points: Vec<BadPoint> = p
        .jump_points()
        .iter()
        .filter(|j| j.x < limit)
        .filter_map(|j| {
            let jp = jump_matrices(&j.dq, &j.dw, lambda);
            let singular = match (jp.minus_singular(), jp.plus_singular()) {
                (true, true) => SingularSide::Both,
                (true, false) => SingularSide::Minus,
                (false, true) => SingularSide::Plus,
                (false, false) => return None,
            };
            Some(BadPoint {
                x: j.x,
                singular,
                abs_det_minus: jp.det_minus.norm(),
                abs_det_plus: jp.det_plus.norm(),
            })
        })
        .collect();
    BadPointReport {
        lambda,
        lambda_in_bad_set: !points.is_empty(),
        points,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dichotomy {
    BothInvertible,
    BothSingular,
    ExactlyOneSingular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DichotomyCheck {
    pub verdict: Dichotomy,
    pub real_atom: bool,
    /// False when the verdict contradicts the theory: exactly one singular
    /// matrix for a real atom, or both singular at non-real `λ` while the
    /// off-diagonal entries have non-zero imaginary parts.
    pub consistent: bool,
}

pub fn real_jump_dichotomy(dq: &Mat2, dw: &Mat2, lambda: C64) -> DichotomyCheck {
    let jp = jump_matrices(dq, dw, lambda);
    let verdict = match (jp.minus_singular(), jp.plus_singular()) {
        (false, false) => Dichotomy::BothInvertible,
        (true, true) => Dichotomy::BothSingular,
        _ => Dichotomy::ExactlyOneSingular,
    };
    let scale = 1.0 + dq.norm() + dw.norm();
    let is_real = |m: &Mat2| m.0.iter().flatten().all(|z| z.im.abs() <= 1e-14 * scale);
    let real_atom = is_real(dq) && is_real(dw);
    // det B₊ − det B₋ = −2i(Im Δq₁₂ − λ Im Δw₁₂)
    let offdiag_real = (dq[(0, 1)].im.abs() + dw[(0, 1)].im.abs()) <= 1e-8 * scale;
    let consistent = match verdict {
        Dichotomy::ExactlyOneSingular => !real_atom,
        Dichotomy::BothSingular => lambda.im == 0.0 || offdiag_real,
        Dichotomy::BothInvertible => true,
    };
    DichotomyCheck {
        verdict,
        real_atom,
        consistent,
    }
}
