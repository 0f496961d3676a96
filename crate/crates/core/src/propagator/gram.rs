//! The Gram matrix of `U(·, 0)`, which detects null-norm solutions of
//! `Ju' + qu = 0`.

use serde::Serialize;

use super::jump::bad_points_below;
use super::sweep::Sweep;
use super::PropagationError;
use crate::linalg::{hermitian_eigenvalues, hermitian_min_eigenvector, Mat2, Vec2, ZERO};
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelGram {
    pub c_max: f64,
    #[serde(skip)]
    pub matrix: Mat2,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub trace: f64,
    /// Unit coefficient vector `v` minimising `v* G v`.
    #[serde(skip)]
    pub min_vector: Vec2,
}

impl KernelGram {
    /// Initial value `U(0, 0)·v` of the solution with the smallest norm.
    pub fn min_solution_initial_value(&self, p: &Problem) -> Vec2 {
        p.initial_matrix().mul_vec(&self.min_vector)
    }
}

/// `G(c) = ∫_(0,c) U(·,0)* w U(·,0)` with its spectral data.
pub fn kernel_gram(p: &Problem, c_max: f64) -> Result<KernelGram, PropagationError> {
    bad_points_below(p, ZERO, c_max).into_result()?;
    let mut sweep = Sweep::new(p, ZERO);
    let s = sweep.advance_to(c_max)?;
    let matrix = s.gram_value();
    if !matrix.is_finite() {
        return Err(PropagationError::NonFinite { x: c_max });
    }
    let (low, high) = hermitian_eigenvalues(&matrix);
    Ok(KernelGram {
        c_max,
        matrix,
        min_eigenvalue: low,
        max_eigenvalue: high,
        trace: matrix.trace().re,
        min_vector: hermitian_min_eigenvector(&matrix),
    })
}
