//! Random piecewise-constant problems for the acceptance and property tests.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use weyl_canon::expr::parse_expr;
use weyl_canon::linalg::{Mat2, C64};
use weyl_canon::problem::{Atom, CoefficientMeasure, HermitianDensity};
use weyl_canon::Problem;

/// Entries of a piecewise-constant Hermitian density: one value per piece.
struct Pieces {
    d11: Vec<f64>,
    d12: Vec<C64>,
    d22: Vec<f64>,
}

fn literal(z: C64) -> String {
    format!("({:.17e}+{:.17e}*i)", z.re, z.im)
}

/// `v₀ + Σ (v_k − v_{k−1})·step(x − t_k)`.
fn staircase(values: &[C64], breaks: &[f64]) -> String {
    let mut s = literal(values[0]);
    for (k, t) in breaks.iter().enumerate() {
        let jump = values[k + 1] - values[k];
        s.push_str(&format!("+{}*step(x-{t:.17e})", literal(jump)));
    }
    s
}

fn density(p: &Pieces, breaks: &[f64]) -> HermitianDensity {
    let real = |v: &[f64]| v.iter().map(|&r| C64::from(r)).collect::<Vec<_>>();
    let e = |s: String| parse_expr(&s).expect("generated expression parses");
    HermitianDensity::new(
        e(staircase(&real(&p.d11), breaks)),
        e(staircase(&p.d12, breaks)),
        e(staircase(&real(&p.d22), breaks)),
    )
}

fn hermitian(rng: &mut StdRng, scale: f64) -> Mat2 {
    Mat2::hermitian(
        rng.gen_range(-scale..scale),
        C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)),
        rng.gen_range(-scale..scale),
    )
}

/// `L L*` for a random lower-triangular `L`.
fn psd(rng: &mut StdRng, scale: f64) -> Mat2 {
    let l11 = rng.gen_range(0.0..scale);
    let l22 = rng.gen_range(0.0..scale);
    let l21 = C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)) * 0.5;
    let l = Mat2::new(C64::from(l11), C64::from(0.0), l21, C64::from(l22));
    l * l.adjoint()
}

/// A half-line problem with piecewise-constant densities changing on
/// `(0, 4)` and up to three Hermitian atoms in `(0.2, 4.5)`, at least 0.1
/// apart and away from the breaks.
pub fn random_problem(seed: u64) -> Problem {
    let mut rng = StdRng::seed_from_u64(seed);
    let pieces = rng.gen_range(1..=3);
    let mut breaks: Vec<f64> = (1..pieces).map(|_| rng.gen_range(0.3..4.0)).collect();
    breaks.sort_by(f64::total_cmp);

    let mut q = Pieces { d11: vec![], d12: vec![], d22: vec![] };
    let mut w = Pieces { d11: vec![], d12: vec![], d22: vec![] };
    for _ in 0..pieces {
        let hq = hermitian(&mut rng, 1.0);
        let hw = psd(&mut rng, 1.0) + Mat2::IDENTITY.scale_real(0.05);
        for (m, p) in [(hq, &mut q), (hw, &mut w)] {
            p.d11.push(m[(0, 0)].re);
            p.d12.push(m[(0, 1)]);
            p.d22.push(m[(1, 1)].re);
        }
    }

    let mut positions: Vec<f64> = Vec::new();
    let n_atoms = rng.gen_range(0..=3);
    while positions.len() < n_atoms {
        let x: f64 = rng.gen_range(0.2..4.5);
        let clear = positions.iter().chain(&breaks).all(|&y| (x - y).abs() > 0.1);
        if clear {
            positions.push(x);
        }
    }
    positions.sort_by(f64::total_cmp);
    let mut q_atoms = Vec::new();
    let mut w_atoms = Vec::new();
    for x in positions {
        match rng.gen_range(0..3) {
            0 => q_atoms.push(Atom { x, m: hermitian(&mut rng, 1.0) }),
            1 => w_atoms.push(Atom { x, m: psd(&mut rng, 1.0) }),
            _ => {
                q_atoms.push(Atom { x, m: hermitian(&mut rng, 1.0) });
                w_atoms.push(Atom { x, m: psd(&mut rng, 1.0) });
            }
        }
    }

    let alpha = rng.gen_range(0.0..std::f64::consts::PI);
    Problem::new(
        f64::INFINITY,
        alpha,
        CoefficientMeasure::new(density(&q, &breaks), q_atoms).with_breaks(breaks.clone()),
        CoefficientMeasure::new(density(&w, &breaks), w_atoms).with_breaks(breaks),
    )
    .expect("generated problem is valid")
}

/// A non-real λ with `Im λ ∈ {±1, ±0.25}` and real part in `[−1, 1]`.
pub fn random_lambda(seed: u64) -> C64 {
    let mut rng = StdRng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let im = [1.0, -1.0, 0.25, -0.25][rng.gen_range(0..4)];
    C64::new(rng.gen_range(-1.0..1.0), im)
}
