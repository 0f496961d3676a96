//! Built-in examples with known closed forms.

use std::f64::consts::FRAC_1_SQRT_2;

use super::{Atom, CoefficientMeasure, HermitianDensity, Problem, ProblemError};
use crate::expr::{expr, BinOp, Expr};
use crate::linalg::{Mat2, Vec2, C64, I, ONE, ZERO};

pub const CATALOG_NAMES: &[&str] = &[
    "lesch_malamud",
    "constant_w",
    "bad_point_minus",
    "bad_point_plus",
    "free_identity",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CatalogEntry {
    /// `w = (1 + a/(x²+1))·1 + iJ`, `q = 0` on the half-line.
    LeschMalamud { a: f64 },
    /// `w = [[4, -i], [i, 1]]`, `q = 0` on the half-line.
    ConstantW,
    /// Atom at 1 whose `B₋` is singular for `λ = 2i`.
    BadPointMinus,
    /// Atom at 1 whose `B₊` is singular for `λ = 2i`.
    BadPointPlus,
    /// `w = 1`, `q = 0` on the half-line.
    FreeIdentity,
}

/// What the theory predicts for an example, for `λ` in the upper half-plane
/// unless stated otherwise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expectation {
    pub definite: Option<bool>,
    /// Unit vector spanning the null-norm solutions of `Ju' + qu = 0`.
    pub null_vector: Option<Vec2>,
    /// `(n₊, n₋)`.
    pub deficiency: Option<(u8, u8)>,
    pub all_l2_upper: Option<bool>,
    pub all_l2_lower: Option<bool>,
    /// A spectral parameter with bad points, and the m-value it forces.
    pub bad_lambda: Option<C64>,
    pub forced_m: Option<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormRecord {
    pub entry: CatalogEntry,
    pub expectation: Expectation,
}

impl CatalogEntry {
    /// Accepts `lesch_malamud`, `lesch_malamud(0.5)` and `lesch_malamud(a=0.5)`.
    pub fn parse(name: &str) -> Result<CatalogEntry, ProblemError> {
        let unknown = || ProblemError::UnknownExample(name.to_string());
        let name = name.trim();
        let (head, arg) = match name.find('(') {
            Some(open) => {
                let inner = name[open + 1..].strip_suffix(')').ok_or_else(unknown)?;
                let inner = inner.trim();
                let inner = inner.strip_prefix("a").map_or(inner, |r| {
                    r.trim_start().strip_prefix('=').unwrap_or(inner).trim()
                });
                (
                    &name[..open],
                    Some(inner.parse::<f64>().map_err(|_| unknown())?),
                )
            }
            None => (name, None),
        };
        let entry = match (head.trim(), arg) {
            ("lesch_malamud", a) => {
                let a = a.unwrap_or(1.0);
                if !(a >= 0.0 && a.is_finite()) {
                    return Err(unknown());
                }
                CatalogEntry::LeschMalamud { a }
            }
            ("constant_w", None) => CatalogEntry::ConstantW,
            ("bad_point_minus", None) => CatalogEntry::BadPointMinus,
            ("bad_point_plus", None) => CatalogEntry::BadPointPlus,
            ("free_identity", None) => CatalogEntry::FreeIdentity,
            _ => return Err(unknown()),
        };
        Ok(entry)
    }

    pub fn name(&self) -> String {
        match self {
            CatalogEntry::LeschMalamud { a } => format!("lesch_malamud(a={a})"),
            CatalogEntry::ConstantW => "constant_w".into(),
            CatalogEntry::BadPointMinus => "bad_point_minus".into(),
            CatalogEntry::BadPointPlus => "bad_point_plus".into(),
            CatalogEntry::FreeIdentity => "free_identity".into(),
        }
    }

    pub fn problem(&self) -> Problem {
        let inf = f64::INFINITY;
        let zero_q = CoefficientMeasure::zero;
        let built = match *self {
            CatalogEntry::LeschMalamud { a } => {
                let diag = Expr::Bin(
                    BinOp::Add,
                    Box::new(Expr::Num(ONE)),
                    Box::new(Expr::Bin(
                        BinOp::Mul,
                        Box::new(Expr::Num(a.into())),
                        Box::new(expr("1/(x^2+1)")),
                    )),
                );
                let w = HermitianDensity::new(diag.clone(), Expr::Num(-I), diag);
                Problem::new(inf, 0.0, zero_q(), CoefficientMeasure::new(w, vec![]))
            }
            CatalogEntry::ConstantW => {
                let w = HermitianDensity::new(expr("4"), Expr::Num(-I), expr("1"));
                Problem::new(inf, 0.0, zero_q(), CoefficientMeasure::new(w, vec![]))
            }
            CatalogEntry::BadPointMinus | CatalogEntry::BadPointPlus => {
                let q = Atom {
                    x: 1.0,
                    m: bad_point_q_atom(*self),
                };
                let w = Atom {
                    x: 1.0,
                    m: Mat2::real(2.0, 0.0, 0.0, 0.0),
                };
                Problem::new(
                    inf,
                    0.0,
                    CoefficientMeasure::new(HermitianDensity::zero(), vec![q]),
                    CoefficientMeasure::new(HermitianDensity::zero(), vec![w]),
                )
            }
            CatalogEntry::FreeIdentity => Problem::new(
                inf,
                0.0,
                zero_q(),
                CoefficientMeasure::new(HermitianDensity::identity(), vec![]),
            ),
        };
        built.expect("catalog problems are valid")
    }

    pub fn expectation(&self) -> Expectation {
        match *self {
            CatalogEntry::LeschMalamud { a } if a > 0.0 => Expectation {
                definite: Some(true),
                deficiency: Some((2, 1)),
                all_l2_upper: Some(true),
                all_l2_lower: Some(false),
                ..Expectation::default()
            },
            CatalogEntry::LeschMalamud { .. } => Expectation {
                definite: Some(false),
                null_vector: Some([C64::from(FRAC_1_SQRT_2), -I * FRAC_1_SQRT_2]),
                deficiency: Some((1, 0)),
                ..Expectation::default()
            },
            CatalogEntry::ConstantW | CatalogEntry::FreeIdentity => Expectation {
                definite: Some(true),
                deficiency: Some((1, 1)),
                all_l2_upper: Some(false),
                all_l2_lower: Some(false),
                ..Expectation::default()
            },
            CatalogEntry::BadPointMinus | CatalogEntry::BadPointPlus => Expectation {
                bad_lambda: Some(2.0 * I),
                forced_m: Some(C64::new(1.0, 1.0)),
                ..Expectation::default()
            },
        }
    }

    pub fn record(&self) -> ClosedFormRecord {
        ClosedFormRecord {
            entry: *self,
            expectation: self.expectation(),
        }
    }
}

fn bad_point_q_atom(entry: CatalogEntry) -> Mat2 {
    let s = if entry == CatalogEntry::BadPointMinus {
        1.0
    } else {
        -1.0
    };
    Mat2::new(ZERO, 2.0 * s * I, -2.0 * s * I, 2.0.into())
}

/// Looks up a catalog example by name.
pub fn builtin_example(name: &str) -> Result<(Problem, ClosedFormRecord), ProblemError> {
    let entry = CatalogEntry::parse(name)?;
    Ok((entry.problem(), entry.record()))
}

fn sign(y: f64) -> f64 {
    if y < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `(e^{k y c} - 1) / y` without cancellation for small `y`.
fn expm1_over(k: f64, y: f64, c: f64) -> f64 {
    if y == 0.0 {
        k * c
    } else {
        (k * y * c).exp_m1() / y
    }
}

impl ClosedFormRecord {
    pub fn name(&self) -> String {
        self.entry.name()
    }

    /// The time change `t(x) = x + a·atan(x)` of the Lesch–Malamud example.
    pub fn time_change(&self, x: f64) -> Option<f64> {
        match self.entry {
            CatalogEntry::LeschMalamud { a } => Some(x + a * x.atan()),
            _ => None,
        }
    }

    /// The fundamental matrix `U(x, λ)` at a continuity point.
    pub fn fundamental_matrix(&self, x: f64, lambda: C64) -> Option<Mat2> {
        match self.entry {
            CatalogEntry::LeschMalamud { .. } => {
                let t = self.time_change(x)?;
                let (s, c) = ((lambda * t).sin(), (lambda * t).cos());
                Some(Mat2::new(c, s, -s, c).scale((I * lambda * x).exp()))
            }
            CatalogEntry::ConstantW => {
                let z = 2.0 * lambda * x;
                let (s, c) = (z.sin(), z.cos());
                Some(Mat2::new(c, 0.5 * s, -2.0 * s, c).scale((I * lambda * x).exp()))
            }
            CatalogEntry::FreeIdentity => {
                let (s, c) = ((lambda * x).sin(), (lambda * x).cos());
                Some(Mat2::new(c, s, -s, c))
            }
            CatalogEntry::BadPointMinus | CatalogEntry::BadPointPlus => {
                if x < 1.0 {
                    return Some(Mat2::IDENTITY);
                }
                let (minus, plus) = self.bad_point_jump(lambda);
                Some(plus.inverse()? * minus)
            }
        }
    }

    fn bad_point_jump(&self, lambda: C64) -> (Mat2, Mat2) {
        let half = (bad_point_q_atom(self.entry) - Mat2::real(2.0, 0.0, 0.0, 0.0).scale(lambda))
            .scale_real(0.5);
        (Mat2::J - half, Mat2::J + half)
    }

    pub fn tau(&self, x: f64, lambda: C64) -> Option<C64> {
        match self.entry {
            CatalogEntry::LeschMalamud { .. } | CatalogEntry::ConstantW => {
                Some((2.0 * I * lambda * x).exp())
            }
            CatalogEntry::FreeIdentity => Some(ONE),
            CatalogEntry::BadPointMinus | CatalogEntry::BadPointPlus => {
                if x < 1.0 {
                    return Some(ONE);
                }
                let (minus, plus) = self.bad_point_jump(lambda);
                let d = plus.det();
                (d != ZERO).then(|| minus.det() / d)
            }
        }
    }

    /// `‖ψ(·, λ)‖²_c`, where a closed form is known.
    pub fn psi_norm_sq(&self, c: f64, lambda: C64) -> Option<f64> {
        let y = lambda.im;
        match self.entry {
            CatalogEntry::ConstantW => {
                // (e^{2cy} - e^{-6cy}) / (8y) = e^{-6cy} (e^{8cy} - 1) / (8y)
                Some((-6.0 * c * y).exp() * expm1_over(8.0, y, c) / 8.0)
            }
            CatalogEntry::FreeIdentity => Some(if y == 0.0 {
                c
            } else {
                (2.0 * y * c).sinh() / (2.0 * y)
            }),
            CatalogEntry::LeschMalamud { a } if a == 0.0 => Some(-expm1_over(-4.0, y, c) / 4.0),
            _ => None,
        }
    }

    /// The limit-point value `m₀(λ)` for examples where it is known.
    pub fn limit_point_m(&self, lambda: C64) -> Option<C64> {
        let s = sign(lambda.im);
        match self.entry {
            CatalogEntry::ConstantW => Some(2.0 * s * I),
            CatalogEntry::FreeIdentity => Some(s * I),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        assert_eq!(
            CatalogEntry::parse("lesch_malamud").unwrap(),
            CatalogEntry::LeschMalamud { a: 1.0 }
        );
        assert_eq!(
            CatalogEntry::parse("lesch_malamud(a=0)").unwrap(),
            CatalogEntry::LeschMalamud { a: 0.0 }
        );
        assert_eq!(
            CatalogEntry::parse("lesch_malamud(0.5)").unwrap(),
            CatalogEntry::LeschMalamud { a: 0.5 }
        );
        for name in CATALOG_NAMES {
            let entry = CatalogEntry::parse(name).unwrap();
            assert_eq!(CatalogEntry::parse(&entry.name()).unwrap(), entry);
        }
        for bad in [
            "nope",
            "constant_w(1)",
            "lesch_malamud(-1)",
            "lesch_malamud(a=)",
        ] {
            assert!(matches!(
                builtin_example(bad),
                Err(ProblemError::UnknownExample(_))
            ));
        }
    }

    #[test]
    fn lesch_malamud_expectations() {
        let (p, rec) = builtin_example("lesch_malamud(a=0)").unwrap();
        assert!(p.is_half_line());
        let v = rec.expectation.null_vector.unwrap();
        assert!((v[1] / v[0] - (-I)).norm() < 1e-15);
        let w = p.densities(3.0).unwrap().1;
        assert_eq!(w, Mat2::new(ONE, -I, I, ONE));
        let w1 = builtin_example("lesch_malamud")
            .unwrap()
            .0
            .densities(1.0)
            .unwrap()
            .1;
        assert_eq!(w1[(0, 0)].re, 1.5);
        assert_eq!(rec.time_change(0.0), Some(0.0));
    }

    #[test]
    fn constant_w_expectations() {
        let (p, rec) = builtin_example("constant_w").unwrap();
        assert_eq!(rec.expectation.deficiency, Some((1, 1)));
        assert_eq!(
            p.densities(0.5).unwrap().1,
            Mat2::new(4.0.into(), -I, I, ONE)
        );
        let expected = ((4.0f64).exp() - (-12.0f64).exp()) / 8.0;
        assert!((rec.psi_norm_sq(2.0, I).unwrap() - expected).abs() < 1e-12 * expected);
        let lower = rec.psi_norm_sq(2.0, -I).unwrap();
        assert!((lower - ((12.0f64).exp() - (-4.0f64).exp()) / 8.0).abs() < 1e-9 * lower);
    }

    #[test]
    fn closed_forms_at_origin() {
        for name in CATALOG_NAMES {
            let (p, rec) = builtin_example(name).unwrap();
            let lambda = C64::new(0.3, 0.7);
            let u0 = rec.fundamental_matrix(0.0, lambda).unwrap();
            assert!((u0 - p.initial_matrix()).max_abs() < 1e-15, "{name}");
            assert_eq!(rec.tau(0.0, lambda), Some(ONE));
        }
    }

    #[test]
    fn closed_form_determinant_is_tau() {
        for name in CATALOG_NAMES {
            let rec = builtin_example(name).unwrap().1;
            for &(x, lambda) in &[(0.5, C64::new(0.2, 1.0)), (2.0, C64::new(-1.0, 0.3))] {
                let u = rec.fundamental_matrix(x, lambda).unwrap();
                let tau = rec.tau(x, lambda).unwrap();
                assert!((u.det() - tau).norm() < 1e-12 * tau.norm(), "{name}");
            }
        }
    }

    #[test]
    fn bad_point_forced_m() {
        let rec = builtin_example("bad_point_minus").unwrap().1;
        let u = rec.fundamental_matrix(2.0, 2.0 * I).unwrap();
        let (phi, psi) = (u.column(0), u.column(1));
        let k = C64::new(-1.0, -1.0);
        assert!((phi[0] - k * psi[0]).norm() < 1e-14);
        assert!((phi[1] - k * psi[1]).norm() < 1e-14);
        assert_eq!(u.rank(1e-12), 1);
    }
}
