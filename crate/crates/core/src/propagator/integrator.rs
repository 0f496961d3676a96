//! Dormand–Prince 8(5,3) steps on `C^N` with step-size control.
//!
//! The 8th-order solution is propagated. Its error is estimated from the
//! embedded 5th- and 3rd-order solutions as in Hairer, Nørsett and Wanner.

use crate::linalg::{C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

const STAGES: usize = 12;

const C: [f64; STAGES] = [
    0.0,
    0.05260015195876773,
    0.0789002279381516,
    0.1183503419072274,
    0.2816496580927726,
    0.3333333333333333,
    0.25,
    0.3076923076923077,
    0.6512820512820513,
    0.6,
    0.8571428571428571,
    1.0,
];

const A: [[f64; STAGES]; STAGES] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        0.05260015195876773,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.0197250569845379,
        0.0591751709536137,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.02958758547680685,
        0.0,
        0.08876275643042054,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.2413651341592667,
        0.0,
        -0.8845494793282861,
        0.924834003261792,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.037037037037037035,
        0.0,
        0.0,
        0.17082860872947386,
        0.12546768756682242,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.037109375,
        0.0,
        0.0,
        0.17025221101954405,
        0.06021653898045596,
        -0.017578125,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.03709200011850479,
        0.0,
        0.0,
        0.17038392571223998,
        0.10726203044637328,
        -0.015319437748624402,
        0.008273789163814023,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.6241109587160757,
        0.0,
        0.0,
        -3.3608926294469414,
        -0.868219346841726,
        27.59209969944671,
        20.154067550477894,
        -43.48988418106996,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.47766253643826434,
        0.0,
        0.0,
        -2.4881146199716677,
        -0.590290826836843,
        21.230051448181193,
        15.279233632882423,
        -33.28821096898486,
        -0.020331201708508627,
        0.0,
        0.0,
        0.0,
    ],
    [
        -0.9371424300859873,
        0.0,
        0.0,
        5.186372428844064,
        1.0914373489967295,
        -8.149787010746927,
        -18.52006565999696,
        22.739487099350505,
        2.4936055526796523,
        -3.0467644718982196,
        0.0,
        0.0,
    ],
    [
        2.273310147516538,
        0.0,
        0.0,
        -10.53449546673725,
        -2.0008720582248625,
        -17.9589318631188,
        27.94888452941996,
        -2.8589982771350235,
        -8.87285693353063,
        12.360567175794303,
        0.6433927460157636,
        0.0,
    ],
];

const B: [f64; STAGES] = [
    0.054293734116568765,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450312892752409,
    1.8915178993145003,
    -5.801203960010585,
    0.3111643669578199,
    -0.1521609496625161,
    0.20136540080403034,
    0.04471061572777259,
];

const E3: [f64; STAGES + 1] = [
    -0.18980075407240762,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450312892752409,
    1.8915178993145003,
    -5.801203960010585,
    -0.4226823213237919,
    -0.1521609496625161,
    0.20136540080403034,
    0.02265179219836082,
    0.0,
];

const E5: [f64; STAGES + 1] = [
    0.01312004499419488,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.2251564463762044,
    -0.4957589496572502,
    1.6643771824549864,
    -0.35032884874997366,
    0.3341791187130175,
    0.08192320648511571,
    -0.022355307863886294,
    0.0,
];

/// One step from `(x, y0)` with signed step `h`. Returns the 8th-order
/// solution and the two embedded error vectors (already multiplied by `h`).
pub(crate) fn dop853_step<const N: usize, E>(
    f: &mut impl FnMut(f64, &[C64; N]) -> Result<[C64; N], E>,
    x: f64,
    h: f64,
    y0: &[C64; N],
) -> Result<([C64; N], [C64; N], [C64; N]), E> {
    let mut k = [[ZERO; N]; STAGES + 1];
    for s in 0..STAGES {
        let mut y = *y0;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                let ah = a * h;
                for i in 0..N {
                    y[i] += ah * kj[i];
                }
            }
        }
        k[s] = f(x + C[s] * h, &y)?;
    }
    let mut y = *y0;
    for i in 0..N {
        let mut acc = ZERO;
        for s in 0..STAGES {
            if B[s] != 0.0 {
                acc += B[s] * k[s][i];
            }
        }
        y[i] += h * acc;
    }
    k[STAGES] = f(x + h, &y)?;
    let mut e5 = [ZERO; N];
    let mut e3 = [ZERO; N];
    for i in 0..N {
        let (mut a5, mut a3) = (ZERO, ZERO);
        for s in 0..=STAGES {
            a5 += E5[s] * k[s][i];
            a3 += E3[s] * k[s][i];
        }
        e5[i] = h * a5;
        e3[i] = h * a3;
    }
    Ok((y, e5, e3))
}

/// Combines the scaled norms of the two embedded error estimates into one
/// error ratio (accept iff `<= 1`).
pub(crate) fn combine_errors(n5: f64, n3: f64) -> f64 {
    if n5 == 0.0 && n3 == 0.0 {
        return 0.0;
    }
    n5 * n5 / (n5 * n5 + 0.01 * n3 * n3).sqrt()
}

/// Step-size update for an error ratio `err`.
pub(crate) fn next_step(h: f64, err: f64) -> f64 {
    let factor = if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-1.0 / 8.0)).clamp(0.2, 5.0)
    };
    h * factor
}
