//! Small dense 2×2 complex linear algebra.
//!
//! Everything in this crate lives in `C^2`, so a fixed-size matrix type with
//! explicit formulas beats a general linear algebra dependency both in speed
//! and in the exactness of determinants and inverses.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// A column vector in `C^2`.
pub type Vec2 = [C64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[ZERO, ZERO], [ZERO, ZERO]]);
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);
    /// The symplectic unit `[[0, -1], [1, 0]]`.
    pub const J: Mat2 = Mat2([[ZERO, C64::new(-1.0, 0.0)], [ONE, ZERO]]);

    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2::new(a.into(), b.into(), c.into(), d.into())
    }

    /// Hermitian matrix from its upper triangle; the diagonal is taken real.
    pub fn hermitian(d11: f64, d12: C64, d22: f64) -> Self {
        Mat2::new(d11.into(), d12, d12.conj(), d22.into())
    }

    pub fn from_columns(first: Vec2, second: Vec2) -> Self {
        Mat2([[first[0], second[0]], [first[1], second[1]]])
    }

    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Mat2::real(c, -s, s, c)
    }

    pub fn column(&self, j: usize) -> Vec2 {
        [self.0[0][j], self.0[1][j]]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Inverse via the adjugate. Returns `None` only for an exactly zero determinant.
    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if det == ZERO {
            return None;
        }
        let inv = det.inv();
        let [[a, b], [c, d]] = self.0;
        Some(Mat2::new(d * inv, -b * inv, -c * inv, a * inv))
    }

    pub fn adjoint(&self) -> Mat2 {
        let [[a, b], [c, d]] = self.0;
        Mat2::new(a.conj(), c.conj(), b.conj(), d.conj())
    }

    pub fn transpose(&self) -> Mat2 {
        let [[a, b], [c, d]] = self.0;
        Mat2::new(a, c, b, d)
    }

    pub fn conj(&self) -> Mat2 {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Mat2 {
        let [[a, b], [c, d]] = self.0;
        Mat2::new(f(a), f(b), f(c), f(d))
    }

    pub fn scale(&self, s: C64) -> Mat2 {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: f64) -> Mat2 {
        self.map(|z| z * s)
    }

    pub fn mul_vec(&self, v: &Vec2) -> Vec2 {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.is_finite())
    }

    /// Rank of the matrix using a relative cutoff on the singular values.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let scale = self.norm();
        if scale == 0.0 {
            return 0;
        }
        // For 2×2, σ_min = |det| / σ_max and σ_max >= ‖M‖_F / √2.
        let sigma_max = {
            let g = self.adjoint() * *self;
            hermitian_eigenvalues(&g).1.max(0.0).sqrt()
        };
        if self.det().norm() / sigma_max <= rel_tol * sigma_max {
            1
        } else {
            2
        }
    }
}

impl Index<(usize, usize)> for Mat2 {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat2 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let mut out = self;
        out += rhs;
        out
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, rhs: Mat2) {
        for i in 0..2 {
            for j in 0..2 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        self + (-rhs)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.map(|z| -z)
    }
}

/// `u* v`.
pub fn inner(u: &Vec2, v: &Vec2) -> C64 {
    u[0].conj() * v[0] + u[1].conj() * v[1]
}

/// `u* J v`.
pub fn j_form(u: &Vec2, v: &Vec2) -> C64 {
    // J v = (-v1, v0)
    -u[0].conj() * v[1] + u[1].conj() * v[0]
}

/// `u* M u` for Hermitian `M`, returned as a real number.
pub fn quad_form(m: &Mat2, u: &Vec2) -> f64 {
    inner(u, &m.mul_vec(u)).re
}

pub fn vec_norm(v: &Vec2) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

pub fn vec_sub(a: &Vec2, b: &Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn vec_scale(v: &Vec2, s: C64) -> Vec2 {
    [v[0] * s, v[1] * s]
}

/// Eigenvalues `(low, high)` of a Hermitian 2×2 matrix.
pub fn hermitian_eigenvalues(m: &Mat2) -> (f64, f64) {
    let a = m.0[0][0].re;
    let d = m.0[1][1].re;
    let b = m.0[0][1];
    let mean = 0.5 * (a + d);
    let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    (mean - half_gap, mean + half_gap)
}

/// Unit eigenvector for the smallest eigenvalue of a Hermitian 2×2 matrix.
pub fn hermitian_min_eigenvector(m: &Mat2) -> Vec2 {
    let (low, _) = hermitian_eigenvalues(m);
    let a = m.0[0][0].re;
    let d = m.0[1][1].re;
    let b = m.0[0][1];
    // (M - low) v = 0: use the row with larger entries.
    let r1 = [C64::from(a - low), b];
    let r2 = [b.conj(), C64::from(d - low)];
    let row = if r1[0].norm() + r1[1].norm() >= r2[0].norm() + r2[1].norm() {
        r1
    } else {
        r2
    };
    let v = if row[0].norm() + row[1].norm() == 0.0 {
        [ONE, ZERO]
    } else {
        [-row[1], row[0]]
    };
    let n = vec_norm(&v);
    [v[0] / n, v[1] / n]
}

/// A 2×2 matrix stored as `exp(log_scale) · mantissa`, for quantities whose
/// magnitude leaves the `f64` range on long intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledMat {
    pub mantissa: Mat2,
    pub log_scale: f64,
}

impl ScaledMat {
    pub fn new(m: Mat2) -> Self {
        let mut s = ScaledMat {
            mantissa: m,
            log_scale: 0.0,
        };
        s.normalize();
        s
    }

    pub fn zero() -> Self {
        ScaledMat {
            mantissa: Mat2::ZERO,
            log_scale: f64::NEG_INFINITY,
        }
    }

    /// Rescales the mantissa by a power of two once its largest entry leaves
    /// `[2^-16, 2^16]`; within that range the mantissa is left untouched.
    pub fn normalize(&mut self) {
        let s = self.mantissa.max_abs();
        if s == 0.0 {
            self.log_scale = f64::NEG_INFINITY;
        } else if s.is_finite() && !(2f64.powi(-16)..=2f64.powi(16)).contains(&s) {
            let e = s.log2().round() as i32;
            self.mantissa = self.mantissa.scale_real(2f64.powi(-e));
            self.log_scale += e as f64 * std::f64::consts::LN_2;
        }
    }

    /// The plain value; overflows to infinity when the scale is too large.
    pub fn value(&self) -> Mat2 {
        if self.log_scale == f64::NEG_INFINITY {
            return Mat2::ZERO;
        }
        self.mantissa.scale_real(self.log_scale.exp())
    }

    /// `self + exp(log_s) · m`.
    pub fn add_scaled(&mut self, m: Mat2, log_s: f64) {
        let mut other = ScaledMat {
            mantissa: m,
            log_scale: log_s,
        };
        other.normalize();
        if other.log_scale == f64::NEG_INFINITY {
            return;
        }
        if self.log_scale == f64::NEG_INFINITY {
            *self = other;
            return;
        }
        let top = self.log_scale.max(other.log_scale);
        self.mantissa = self.mantissa.scale_real((self.log_scale - top).exp())
            + other.mantissa.scale_real((other.log_scale - top).exp());
        self.log_scale = top;
        self.normalize();
    }

    /// Entry `(i, j)` as `(mantissa, log_scale)`.
    pub fn entry_log(&self, i: usize, j: usize) -> (C64, f64) {
        (self.mantissa[(i, j)], self.log_scale)
    }
}

/// `ln|z|` that stays finite-safe for tiny mantissas.
pub fn ln_abs(z: C64) -> f64 {
    z.norm().ln()
}
