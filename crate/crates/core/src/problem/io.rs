//! JSON problem files.
//!
//! ```json
//! {
//!   "b": "inf",
//!   "alpha": 0,
//!   "q": {"d11": "0", "d12": "0", "d22": "0",
//!         "atoms": [{"x": 1, "m": [[0,0],[0,2],[0,-2],[2,0]]}]},
//!   "w": {"d11": "1", "d22": "1", "breaks": [2.5]}
//! }
//! ```
//!
//! Atom matrices are row-major lists of `[re, im]` pairs. Missing density
//! entries default to `"0"`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Atom, CoefficientMeasure, HermitianDensity, Problem, ProblemError};
use crate::expr::parse_expr;
use crate::linalg::{Mat2, C64};

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawEndpoint {
    Number(f64),
    Text(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtom {
    x: f64,
    m: [[f64; 2]; 4],
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d11: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d12: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d22: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    atoms: Vec<RawAtom>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    breaks: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    b: RawEndpoint,
    #[serde(default)]
    alpha: f64,
    #[serde(default)]
    q: RawMeasure,
    w: RawMeasure,
}

pub fn parse_problem(document: &str) -> Result<Problem, ProblemError> {
    let raw: RawProblem =
        serde_json::from_str(document).map_err(|e| ProblemError::Schema(e.to_string()))?;
    let b = match raw.b {
        RawEndpoint::Number(b) => b,
        RawEndpoint::Text(s) if matches!(s.trim(), "inf" | "+inf" | "infinity") => f64::INFINITY,
        RawEndpoint::Text(s) => {
            return Err(ProblemError::Schema(format!(
                "`b` must be a number or \"inf\", got \"{s}\""
            )))
        }
    };
    let q = measure_from_raw(raw.q, "q")?;
    let w = measure_from_raw(raw.w, "w")?;
    Problem::new(b, raw.alpha, q, w)
}

fn measure_from_raw(raw: RawMeasure, name: &str) -> Result<CoefficientMeasure, ProblemError> {
    let entry = |key: &str, text: Option<String>| {
        let text = text.unwrap_or_else(|| "0".into());
        parse_expr(&text).map_err(|source| ProblemError::Expr {
            field: format!("{name}.{key}"),
            source,
        })
    };
    let density = HermitianDensity::new(
        entry("d11", raw.d11)?,
        entry("d12", raw.d12)?,
        entry("d22", raw.d22)?,
    );
    let atoms = raw
        .atoms
        .into_iter()
        .map(|a| {
            let z = |k: usize| C64::new(a.m[k][0], a.m[k][1]);
            Atom {
                x: a.x,
                m: Mat2::new(z(0), z(1), z(2), z(3)),
            }
        })
        .collect();
    Ok(CoefficientMeasure::new(density, atoms).with_breaks(raw.breaks))
}

fn measure_to_raw(m: &CoefficientMeasure) -> RawMeasure {
    let atoms = m
        .atoms
        .iter()
        .map(|a| {
            let e = |i: usize, j: usize| [a.m[(i, j)].re, a.m[(i, j)].im];
            RawAtom {
                x: a.x,
                m: [e(0, 0), e(0, 1), e(1, 0), e(1, 1)],
            }
        })
        .collect();
    RawMeasure {
        d11: Some(m.density.d11.to_string()),
        d12: Some(m.density.d12.to_string()),
        d22: Some(m.density.d22.to_string()),
        atoms,
        breaks: m.breaks.clone(),
    }
}

pub fn problem_to_json(p: &Problem) -> Value {
    let raw = RawProblem {
        b: if p.b.is_finite() {
            RawEndpoint::Number(p.b)
        } else {
            RawEndpoint::Text("inf".into())
        },
        alpha: p.alpha,
        q: measure_to_raw(&p.q),
        w: measure_to_raw(&p.w),
    };
    serde_json::to_value(raw).expect("problem serialization cannot fail")
}

pub fn serialize_problem(p: &Problem) -> String {
    serde_json::to_string_pretty(&problem_to_json(p)).expect("problem serialization cannot fail")
}
