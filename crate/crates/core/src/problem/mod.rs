//! Measure-coefficient problems `Ju' + qu = λwu` on `(0, b)`.
//!
//! A coefficient is an absolutely continuous Hermitian density plus a finite
//! list of point masses. Only the upper triangle of the density is stored, so
//! every sampled matrix is Hermitian by construction.

mod catalog;
mod io;
mod sl;

pub use catalog::{builtin_example, CatalogEntry, ClosedFormRecord, Expectation, CATALOG_NAMES};
pub use io::{parse_problem, problem_to_json, serialize_problem};
pub use sl::{sl_to_canonical, SlProblem};

use std::f64::consts::PI;

use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::linalg::{hermitian_eigenvalues, Mat2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("in {field}: {source}")]
    Expr {
        field: String,
        #[source]
        source: ExprError,
    },
    #[error("{measure} atom {index} at x = {x} is not Hermitian")]
    NotHermitian {
        measure: &'static str,
        index: usize,
        x: f64,
    },
    #[error("{measure} density entry {entry} is not real at x = {x} (imaginary part {imag})")]
    NonRealDiagonal {
        measure: &'static str,
        entry: &'static str,
        x: f64,
        imag: f64,
    },
    #[error("{what} is not positive semi-definite (eigenvalue {eigenvalue})")]
    NotPsd { what: String, eigenvalue: f64 },
    #[error("{measure} atom {index} at x = {x} lies outside (0, {b})")]
    AtomOutside {
        measure: &'static str,
        index: usize,
        x: f64,
        b: f64,
    },
    #[error("{measure} atoms at x = {x} are repeated")]
    DuplicateAtom { measure: &'static str, x: f64 },
    #[error("density break at x = {0} lies outside (0, b)")]
    BreakOutside(f64),
    #[error("right endpoint must be positive or \"inf\", got {0}")]
    InvalidEndpoint(f64),
    #[error("boundary angle must lie in [0, pi), got {0}")]
    InvalidAlpha(f64),
    #[error("w is identically zero")]
    ZeroWeight,
    #[error("{measure} density entry {entry} does not look integrable near 0")]
    NotIntegrableNearZero {
        measure: &'static str,
        entry: &'static str,
    },
    #[error("1/p is required but p vanishes at x = {0}")]
    PVanishes(f64),
    #[error("unknown catalog example `{0}`")]
    UnknownExample(String),
}

/// The upper triangle of a Hermitian density; `d21 = conj(d12)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianDensity {
    pub d11: Expr,
    pub d12: Expr,
    pub d22: Expr,
}

impl HermitianDensity {
    pub fn new(d11: Expr, d12: Expr, d22: Expr) -> Self {
        HermitianDensity {
            d11: d11.fold_constants(),
            d12: d12.fold_constants(),
            d22: d22.fold_constants(),
        }
    }

    pub fn zero() -> Self {
        HermitianDensity::new(Expr::zero(), Expr::zero(), Expr::zero())
    }

    pub fn identity() -> Self {
        HermitianDensity::new(
            Expr::constant(1.0.into()),
            Expr::zero(),
            Expr::constant(1.0.into()),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.d11.is_zero() && self.d12.is_zero() && self.d22.is_zero()
    }

    fn entries(&self) -> [(&'static str, &Expr); 3] {
        [("d11", &self.d11), ("d12", &self.d12), ("d22", &self.d22)]
    }

    /// The sampled matrix. Diagonal entries contribute their real part only.
    pub fn eval(&self, x: f64) -> Result<Mat2, ExprError> {
        let d11 = self.d11.eval(x)?.re;
        let d12 = self.d12.eval(x)?;
        let d22 = self.d22.eval(x)?.re;
        Ok(Mat2::hermitian(d11, d12, d22))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub x: f64,
    pub m: Mat2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMeasure {
    pub density: HermitianDensity,
    pub atoms: Vec<Atom>,
    /// Points where the density may jump; propagation never steps across them.
    pub breaks: Vec<f64>,
}

impl CoefficientMeasure {
    pub fn new(density: HermitianDensity, atoms: Vec<Atom>) -> Self {
        CoefficientMeasure {
            density,
            atoms,
            breaks: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        CoefficientMeasure::new(HermitianDensity::zero(), Vec::new())
    }

    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }

    fn atom_at(&self, x: f64) -> Mat2 {
        self.atoms
            .iter()
            .find(|a| a.x == x)
            .map(|a| a.m)
            .unwrap_or(Mat2::ZERO)
    }
}

/// A position where q or w carries a point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpPoint {
    pub x: f64,
    pub dq: Mat2,
    pub dw: Mat2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub b: f64,
    pub alpha: f64,
    pub q: CoefficientMeasure,
    pub w: CoefficientMeasure,
    jumps: Vec<JumpPoint>,
    breaks: Vec<f64>,
}

const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-12;

impl Problem {
    /// Validates and assembles a problem. Atoms are sorted by position.
    pub fn new(
        b: f64,
        alpha: f64,
        q: CoefficientMeasure,
        w: CoefficientMeasure,
    ) -> Result<Problem, ProblemError> {
        if !(b > 0.0) {
            return Err(ProblemError::InvalidEndpoint(b));
        }
        if !(0.0..PI).contains(&alpha) {
            return Err(ProblemError::InvalidAlpha(alpha));
        }
        let q = normalize_measure(q, "q", b)?;
        let w = normalize_measure(w, "w", b)?;

        let grid = validation_grid(b);
        for (measure, coef) in [("q", &q), ("w", &w)] {
            for &x in &grid {
                for (entry, e) in [("d11", &coef.density.d11), ("d22", &coef.density.d22)] {
                    let v = e.eval(x).map_err(|source| ProblemError::Expr {
                        field: format!("{measure}.{entry}"),
                        source,
                    })?;
                    if v.im.abs() > HERMITIAN_TOL * (1.0 + v.re.abs()) {
                        return Err(ProblemError::NonRealDiagonal {
                            measure,
                            entry,
                            x,
                            imag: v.im,
                        });
                    }
                }
                coef.density
                    .d12
                    .eval(x)
                    .map_err(|source| ProblemError::Expr {
                        field: format!("{measure}.d12"),
                        source,
                    })?;
            }
            check_integrable_near_zero(coef, measure, b)?;
        }

        let mut weight_seen = false;
        for &x in &grid {
            let m = w.density.eval(x).map_err(|source| ProblemError::Expr {
                field: "w".into(),
                source,
            })?;
            check_psd(&m, || format!("w density at x = {x}"))?;
            weight_seen |= m.max_abs() > 0.0;
        }
        for (k, a) in w.atoms.iter().enumerate() {
            check_psd(&a.m, || format!("w atom {k} at x = {}", a.x))?;
            weight_seen |= a.m.max_abs() > 0.0;
        }
        if !weight_seen {
            return Err(ProblemError::ZeroWeight);
        }

        let mut positions: Vec<f64> = q.atoms.iter().chain(&w.atoms).map(|a| a.x).collect();
        positions.sort_by(f64::total_cmp);
        positions.dedup();
        let jumps = positions
            .into_iter()
            .map(|x| JumpPoint {
                x,
                dq: q.atom_at(x),
                dw: w.atom_at(x),
            })
            .collect();
        let mut breaks: Vec<f64> = q.breaks.iter().chain(&w.breaks).copied().collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        Ok(Problem {
            b,
            alpha,
            q,
            w,
            jumps,
            breaks,
        })
    }

    pub fn is_half_line(&self) -> bool {
        self.b.is_infinite()
    }

    /// Union of q and w atoms, sorted by position.
    pub fn jump_points(&self) -> &[JumpPoint] {
        &self.jumps
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn has_atom_at(&self, x: f64) -> bool {
        self.jumps.iter().any(|j| j.x == x)
    }

    /// Densities of q and w at a continuity point.
    pub fn densities(&self, x: f64) -> Result<(Mat2, Mat2), ExprError> {
        Ok((self.q.density.eval(x)?, self.w.density.eval(x)?))
    }

    /// True when every entry of q and w is real (off-diagonal densities and atoms).
    pub fn is_real(&self) -> bool {
        let grid = validation_grid(self.b);
        let offdiag_real = |d: &HermitianDensity| match d.d12.constant_value() {
            Some(v) => v.im == 0.0,
            None => grid
                .iter()
                .all(|&x| d.d12.eval(x).map(|v| v.im == 0.0).unwrap_or(false)),
        };
        offdiag_real(&self.q.density)
            && offdiag_real(&self.w.density)
            && self
                .jumps
                .iter()
                .all(|j| j.dq[(0, 1)].im == 0.0 && j.dw[(0, 1)].im == 0.0)
    }

    pub fn initial_matrix(&self) -> Mat2 {
        Mat2::rotation(self.alpha)
    }
}

fn normalize_measure(
    mut m: CoefficientMeasure,
    measure: &'static str,
    b: f64,
) -> Result<CoefficientMeasure, ProblemError> {
    for (index, a) in m.atoms.iter_mut().enumerate() {
        if !(a.x > 0.0 && a.x < b) {
            return Err(ProblemError::AtomOutside {
                measure,
                index,
                x: a.x,
                b,
            });
        }
        let asym = (a.m - a.m.adjoint()).max_abs();
        if !a.m.is_finite() || asym > HERMITIAN_TOL * (1.0 + a.m.max_abs()) {
            return Err(ProblemError::NotHermitian {
                measure,
                index,
                x: a.x,
            });
        }
        a.m = Mat2::hermitian(a.m[(0, 0)].re, a.m[(0, 1)], a.m[(1, 1)].re);
    }
    m.atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
    if let Some(pair) = m.atoms.windows(2).find(|p| p[0].x == p[1].x) {
        return Err(ProblemError::DuplicateAtom {
            measure,
            x: pair[0].x,
        });
    }
    for &x in &m.breaks {
        if !(x > 0.0 && x < b) {
            return Err(ProblemError::BreakOutside(x));
        }
    }
    m.breaks.sort_by(f64::total_cmp);
    m.breaks.dedup();
    Ok(m)
}

fn check_psd(m: &Mat2, what: impl FnOnce() -> String) -> Result<(), ProblemError> {
    let (low, _) = hermitian_eigenvalues(m);
    let trace = m.trace().re.abs();
    if low < -PSD_TOL * trace {
        return Err(ProblemError::NotPsd {
            what: what(),
            eigenvalue: low,
        });
    }
    Ok(())
}

/// Sample points used for the Hermitian/PSD checks.
pub fn validation_grid(b: f64) -> Vec<f64> {
    if b.is_finite() {
        (0..200).map(|k| b * (k as f64 + 0.5) / 200.0).collect()
    } else {
        let mut g: Vec<f64> = (0..100).map(|k| 10.0 * (k as f64 + 0.5) / 100.0).collect();
        g.extend((0..50).map(|k| 10.0 * 1000f64.powf((k as f64 + 1.0) / 50.0)));
        g
    }
}

const GAUSS5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn gauss5(f: &impl Fn(f64) -> Option<f64>, a: f64, b: f64) -> Option<f64> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut s = 0.0;
    for (t, wgt) in GAUSS5 {
        s += wgt * f(mid + half * t)?;
    }
    Some(s * half)
}

/// Dyadic-shell test of `∫_(0,c0] |entry|`: the contribution of the shell
/// nearest to 0 must be negligible against the total.
fn check_integrable_near_zero(
    coef: &CoefficientMeasure,
    measure: &'static str,
    b: f64,
) -> Result<(), ProblemError> {
    const SHELLS: usize = 200;
    let c0 = if b.is_finite() {
        (0.5 * b).min(1.0)
    } else {
        1.0
    };
    for (entry, e) in coef.density.entries() {
        if e.is_constant() {
            continue;
        }
        let f = |x: f64| e.eval(x).ok().map(|v| v.norm());
        let fail = || ProblemError::NotIntegrableNearZero { measure, entry };
        let mut total = 0.0;
        let mut last = 0.0;
        let mut hi = c0;
        for _ in 0..SHELLS {
            let lo = 0.5 * hi;
            last = gauss5(&f, lo, hi).ok_or_else(fail)?;
            total += last;
            hi = lo;
        }
        if !total.is_finite() || last > 1e-8 * (1.0 + total) {
            return Err(fail());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::linalg::C64;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn density(d11: &str, d12: &str, d22: &str) -> HermitianDensity {
        HermitianDensity::new(
            parse_expr(d11).unwrap(),
            parse_expr(d12).unwrap(),
            parse_expr(d22).unwrap(),
        )
    }

    fn identity_w() -> CoefficientMeasure {
        CoefficientMeasure::new(HermitianDensity::identity(), vec![])
    }

    #[test]
    fn minimal_problem() {
        let p = Problem::new(1.0, 0.0, CoefficientMeasure::zero(), identity_w()).unwrap();
        assert!(p.jump_points().is_empty());
        assert_eq!(p.initial_matrix(), Mat2::IDENTITY);
    }

    #[test]
    fn rejects_negative_w_atom() {
        let w = CoefficientMeasure::new(
            HermitianDensity::zero(),
            vec![Atom {
                x: 0.5,
                m: Mat2::real(-1.0, 0.0, 0.0, 0.0),
            }],
        );
        let err = Problem::new(1.0, 0.0, CoefficientMeasure::zero(), w).unwrap_err();
        assert!(matches!(err, ProblemError::NotPsd { ref what, .. } if what.contains("atom 0")));
    }

    #[test]
    fn rejects_indefinite_w_density() {
        let w = CoefficientMeasure::new(density("1", "2", "1"), vec![]);
        assert!(matches!(
            Problem::new(1.0, 0.0, CoefficientMeasure::zero(), w),
            Err(ProblemError::NotPsd { .. })
        ));
    }

    #[test]
    fn rejects_zero_weight() {
        assert_eq!(
            Problem::new(
                1.0,
                0.0,
                CoefficientMeasure::zero(),
                CoefficientMeasure::zero()
            ),
            Err(ProblemError::ZeroWeight)
        );
    }

    #[test]
    fn rejects_bad_atoms() {
        let atom = |x: f64, m: Mat2| {
            CoefficientMeasure::new(HermitianDensity::zero(), vec![Atom { x, m }])
        };
        let herm = Mat2::hermitian(1.0, c(0.0, 1.0), 0.0);
        assert!(matches!(
            Problem::new(1.0, 0.0, atom(1.0, herm), identity_w()),
            Err(ProblemError::AtomOutside { .. })
        ));
        let skew = Mat2::new(c(0.0, 0.0), c(0.0, 2.0), c(0.0, 2.0), c(2.0, 0.0));
        assert!(matches!(
            Problem::new(2.0, 0.0, atom(1.0, skew), identity_w()),
            Err(ProblemError::NotHermitian {
                measure: "q",
                index: 0,
                ..
            })
        ));
        let twice = CoefficientMeasure::new(
            HermitianDensity::zero(),
            vec![Atom { x: 0.5, m: herm }, Atom { x: 0.5, m: herm }],
        );
        assert!(matches!(
            Problem::new(1.0, 0.0, twice, identity_w()),
            Err(ProblemError::DuplicateAtom { .. })
        ));
    }

    #[test]
    fn rejects_bad_endpoint_and_angle() {
        assert!(matches!(
            Problem::new(0.0, 0.0, CoefficientMeasure::zero(), identity_w()),
            Err(ProblemError::InvalidEndpoint(_))
        ));
        assert!(matches!(
            Problem::new(1.0, PI, CoefficientMeasure::zero(), identity_w()),
            Err(ProblemError::InvalidAlpha(_))
        ));
    }

    #[test]
    fn integrability_near_zero() {
        let ok = CoefficientMeasure::new(density("x^(-0.5)", "0", "0"), vec![]);
        assert!(Problem::new(1.0, 0.0, ok, identity_w()).is_ok());
        let bad = CoefficientMeasure::new(density("1/x", "0", "0"), vec![]);
        assert!(matches!(
            Problem::new(1.0, 0.0, bad, identity_w()),
            Err(ProblemError::NotIntegrableNearZero {
                measure: "q",
                entry: "d11"
            })
        ));
    }

    #[test]
    fn diagonal_must_be_real() {
        let q = CoefficientMeasure::new(density("i*x", "0", "0"), vec![]);
        assert!(matches!(
            Problem::new(1.0, 0.0, q, identity_w()),
            Err(ProblemError::NonRealDiagonal { .. })
        ));
    }

    #[test]
    fn jump_points_merge_q_and_w() {
        let q = CoefficientMeasure::new(
            HermitianDensity::zero(),
            vec![
                Atom {
                    x: 2.0,
                    m: Mat2::real(1.0, 0.0, 0.0, 0.0),
                },
                Atom {
                    x: 1.0,
                    m: Mat2::real(0.0, 0.0, 0.0, 3.0),
                },
            ],
        );
        let w = CoefficientMeasure::new(
            HermitianDensity::identity(),
            vec![Atom {
                x: 1.0,
                m: Mat2::real(2.0, 0.0, 0.0, 0.0),
            }],
        );
        let p = Problem::new(f64::INFINITY, 0.0, q, w).unwrap();
        let xs: Vec<f64> = p.jump_points().iter().map(|j| j.x).collect();
        assert_eq!(xs, vec![1.0, 2.0]);
        assert_eq!(p.jump_points()[0].dw, Mat2::real(2.0, 0.0, 0.0, 0.0));
        assert_eq!(p.jump_points()[1].dw, Mat2::ZERO);
    }

    #[test]
    fn hermitian_density_is_structural() {
        let d = density("2", "1+2*i", "x");
        let m = d.eval(3.0).unwrap();
        assert_eq!(m, m.adjoint());
        assert_eq!(m[(1, 0)], c(1.0, -2.0));
    }
}
