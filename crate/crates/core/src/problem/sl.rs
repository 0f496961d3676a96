//! Sturm–Liouville problems `-(p(y' - s y))' - s p (y' - s y) + v y = λ r y`
//! written as canonical systems.

use super::{validation_grid, Atom, CoefficientMeasure, HermitianDensity, Problem, ProblemError};
use crate::expr::{BinOp, Expr};
use crate::linalg::{Mat2, ONE};

/// Coefficients of a Sturm–Liouville problem. `v` and `r` may carry point
/// masses, given as `(position, weight)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SlProblem {
    pub b: f64,
    pub alpha: f64,
    pub p: Expr,
    pub s: Expr,
    pub v: Expr,
    pub r: Expr,
    pub v_atoms: Vec<(f64, f64)>,
    pub r_atoms: Vec<(f64, f64)>,
}

impl SlProblem {
    /// Plain `-y'' = λy`-type problem with constant coefficients.
    pub fn new(b: f64, alpha: f64, p: Expr, s: Expr, v: Expr, r: Expr) -> Self {
        SlProblem {
            b,
            alpha,
            p,
            s,
            v,
            r,
            v_atoms: Vec::new(),
            r_atoms: Vec::new(),
        }
    }
}

/// `q = [[v, s], [s, -1/p]]`, `w = [[r, 0], [0, 0]]`.
pub fn sl_to_canonical(sl: &SlProblem) -> Result<Problem, ProblemError> {
    if sl.r.is_zero() && sl.r_atoms.iter().all(|&(_, g)| g == 0.0) {
        return Err(ProblemError::ZeroWeight);
    }
    for &x in &validation_grid(sl.b) {
        let p = sl.p.eval(x).map_err(|source| ProblemError::Expr {
            field: "p".into(),
            source,
        })?;
        let inv = 1.0 / p;
        if p.norm() == 0.0 || !inv.re.is_finite() || !inv.im.is_finite() {
            return Err(ProblemError::PVanishes(x));
        }
        for (name, e) in [("p", &sl.p), ("s", &sl.s)] {
            let z = e.eval(x).map_err(|source| ProblemError::Expr {
                field: name.into(),
                source,
            })?;
            if z.im != 0.0 {
                return Err(ProblemError::Schema(format!(
                    "{name} must be real-valued (x = {x})"
                )));
            }
        }
    }
    let minus_inv_p = Expr::Neg(Box::new(Expr::Bin(
        BinOp::Div,
        Box::new(Expr::Num(ONE)),
        Box::new(sl.p.clone()),
    )));
    let first_entry_atoms = |atoms: &[(f64, f64)]| {
        atoms
            .iter()
            .map(|&(x, g)| Atom {
                x,
                m: Mat2::real(g, 0.0, 0.0, 0.0),
            })
            .collect::<Vec<_>>()
    };
    let q = CoefficientMeasure::new(
        HermitianDensity::new(sl.v.clone(), sl.s.clone(), minus_inv_p),
        first_entry_atoms(&sl.v_atoms),
    );
    let w = CoefficientMeasure::new(
        HermitianDensity::new(sl.r.clone(), Expr::zero(), Expr::zero()),
        first_entry_atoms(&sl.r_atoms),
    );
    Problem::new(sl.b, sl.alpha, q, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::expr;

    fn unit(b: f64) -> SlProblem {
        SlProblem::new(b, 0.0, expr("1"), expr("0"), expr("0"), expr("1"))
    }

    #[test]
    fn unit_coefficients() {
        let p = sl_to_canonical(&unit(1.0)).unwrap();
        let (q, w) = p.densities(0.4).unwrap();
        assert_eq!(q, Mat2::real(0.0, 0.0, 0.0, -1.0));
        assert_eq!(w, Mat2::real(1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn potential_atom_becomes_q_atom() {
        let mut sl = unit(3.0);
        sl.v_atoms.push((1.0, 2.5));
        let p = sl_to_canonical(&sl).unwrap();
        let j = p.jump_points()[0];
        assert_eq!(j.x, 1.0);
        assert_eq!(j.dq, Mat2::real(2.5, 0.0, 0.0, 0.0));
        assert_eq!(j.dw, Mat2::ZERO);
    }

    #[test]
    fn zero_weight_is_rejected() {
        let mut sl = unit(1.0);
        sl.r = expr("0");
        assert_eq!(sl_to_canonical(&sl), Err(ProblemError::ZeroWeight));
    }

    #[test]
    fn vanishing_p_is_rejected() {
        let mut sl = unit(1.0);
        sl.p = expr("x-0.5025");
        assert!(matches!(
            sl_to_canonical(&sl),
            Err(ProblemError::PVanishes(_))
        ));
    }

    #[test]
    fn general_coefficients() {
        let sl = SlProblem::new(
            2.0,
            0.5,
            expr("1+x"),
            expr("x"),
            expr("cos(x)"),
            expr("exp(x)"),
        );
        let p = sl_to_canonical(&sl).unwrap();
        let (q, w) = p.densities(1.0).unwrap();
        assert!((q[(1, 1)].re + 0.5).abs() < 1e-15);
        assert_eq!(q[(0, 1)], q[(1, 0)]);
        assert!((w[(0, 0)].re - 1f64.exp()).abs() < 1e-15);
    }
}
