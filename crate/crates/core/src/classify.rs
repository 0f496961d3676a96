//! Limits as `c → b`: disk traces, limit detection, definiteness and
//! deficiency indices.
//!
//! Verdicts are drawn from finite grids and are heuristic. Whenever the
//! evidence is ambiguous the result is `Inconclusive` rather than a guess.

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::linalg::{Vec2, C64};
use crate::problem::Problem;
use crate::propagator::{bad_points, kernel_gram, PropagationError, Sample, Sweep};
use crate::weyl::{chi_norm_sq, weyl_set, WeylError, WeylSet, WeylShape};

pub const REPORT_SCHEMA: &str = "weyl-canon/report/v1";

pub fn serialize_complex<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Weyl(#[from] WeylError),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

impl From<PropagationError> for ClassifyError {
    fn from(e: PropagationError) -> Self {
        ClassifyError::Weyl(e.into())
    }
}

/// Geometric grid `c_k = c₀ρᵏ`, or `b − (b − c₀)ρ^{−k}` for finite `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GridSpec {
    /// Defaults to `min(1, b/10)`.
    pub c0: Option<f64>,
    pub rho: f64,
    pub count: usize,
    /// Points beyond this are dropped.
    pub c_max: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            c0: None,
            rho: 1.5,
            count: 24,
            c_max: None,
        }
    }
}

impl GridSpec {
    pub fn points(&self, b: f64) -> Vec<f64> {
        let c0 = self.c0.unwrap_or_else(|| (b / 10.0).min(1.0));
        (0..self.count as i32)
            .map(|k| {
                if b.is_finite() {
                    b - (b - c0) * self.rho.powi(-k)
                } else {
                    c0 * self.rho.powi(k)
                }
            })
            .filter(|&c| c > 0.0 && c < b && self.c_max.is_none_or(|m| c <= m))
            .collect()
    }
}

pub fn default_grid(b: f64) -> Vec<f64> {
    GridSpec::default().points(b)
}

/// Moves grid points that sit on an atom by `1e-9` of the gap to the next
/// grid point (or to `b`).
pub fn avoid_atoms(p: &Problem, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .enumerate()
        .map(|(k, &c)| {
            if !p.has_atom_at(c) {
                return c;
            }
            let next = grid.get(k + 1).copied().unwrap_or(p.b);
            let gap = if next.is_finite() { next - c } else { c.max(1.0) };
            let mut moved = c + 1e-9 * gap;
            while p.has_atom_at(moved) {
                moved += 1e-9 * gap;
            }
            moved
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub c: f64,
    pub set: WeylSet,
    pub sample: Sample,
    pub psi_norm_sq: f64,
    pub phi_norm_sq: f64,
    pub log_psi_norm_sq: f64,
    pub log_phi_norm_sq: f64,
    pub tau: C64,
    pub log_tau: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiskTrace {
    pub lambda: C64,
    pub b: f64,
    pub points: Vec<TracePoint>,
}

impl DiskTrace {
    pub fn last(&self) -> Option<&TracePoint> {
        self.points.last()
    }

    /// Largest violation of `D(c) ⊆ D(c′)` (disks) or of half-plane
    /// shrinking over consecutive points; zero or negative when nested.
    pub fn nesting_violation(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| match (w[0].set.shape, w[1].set.shape) {
                (
                    WeylShape::Disk {
                        center: m0,
                        radius: r0,
                        ..
                    },
                    WeylShape::Disk {
                        center: m1,
                        radius: r1,
                        ..
                    },
                ) => (m1 - m0).norm() + r1 - r0,
                (
                    WeylShape::HalfPlane {
                        im_level: l0,
                        orientation,
                    },
                    WeylShape::HalfPlane { im_level: l1, .. },
                ) => orientation * (l0 - l1),
                (WeylShape::Disk { .. }, WeylShape::HalfPlane { .. }) => f64::INFINITY,
                (WeylShape::HalfPlane { .. }, WeylShape::Disk { .. }) => f64::NEG_INFINITY,
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Weyl sets along an increasing grid from a single propagation sweep.
pub fn trace_disks(p: &Problem, lambda: C64, grid: &[f64]) -> Result<DiskTrace, WeylError> {
    if lambda.im == 0.0 {
        return Err(WeylError::RealLambda(lambda));
    }
    bad_points(p, lambda).into_result()?;
    let mut sweep = Sweep::new(p, lambda);
    let mut points = Vec::with_capacity(grid.len());
    for c in avoid_atoms(p, grid) {
        let s = sweep.advance_to(c)?;
        let set = weyl_set(&s, lambda)?;
        points.push(TracePoint {
            c,
            set,
            sample: s,
            psi_norm_sq: s.psi_norm_sq(),
            phi_norm_sq: s.phi_norm_sq(),
            log_psi_norm_sq: s.log_psi_norm_sq(),
            log_phi_norm_sq: s.log_phi_norm_sq(),
            tau: s.tau(),
            log_tau: s.log_tau(),
        });
    }
    Ok(DiskTrace {
        lambda,
        b: p.b,
        points,
    })
}

/// Thresholds for [`detect_limit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Thresholds {
    /// Each of the last three radius ratios must be at most this for a
    /// shrinking trend.
    pub shrink_ratio: f64,
    /// Total decay `r(last)/r(first)` required for a singleton.
    pub point_drop: f64,
    /// Relative change over the last three points that counts as converged.
    pub settle: f64,
    /// Largest extrapolated remaining change accepted when the increments
    /// decay geometrically.
    pub tail_tol: f64,
    /// Smallest radius accepted for a limit circle.
    pub min_radius: f64,
    pub min_points: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            shrink_ratio: 0.9,
            point_drop: 1e-6,
            settle: 1e-4,
            tail_tol: 1e-2,
            min_radius: 1e-6,
            min_points: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum LimitVerdict {
    LimitPoint {
        #[serde(serialize_with = "serialize_complex")]
        m0: C64,
    },
    LimitCircle {
        #[serde(serialize_with = "serialize_complex")]
        center: C64,
        radius: f64,
    },
    HalfPlaneLimit {
        level: f64,
    },
    EmptyLimit,
    Inconclusive,
}

/// Whether a series has settled: either it moved by less than
/// `settle·scale` over the last three points, or its last three increments
/// keep one sign, shrink by at least `shrink_ratio` each time, and the
/// geometric tail they imply is below `tail_tol·scale`.
fn converged(values: &[f64], scale: f64, th: &Thresholds) -> bool {
    let n = values.len();
    if n < 4 || values[n - 4..].iter().any(|v| !v.is_finite()) {
        return false;
    }
    if (values[n - 1] - values[n - 3]).abs() < th.settle * scale {
        return true;
    }
    let d: Vec<f64> = values[n - 4..].windows(2).map(|w| w[1] - w[0]).collect();
    let same_sign = d.iter().all(|x| *x >= 0.0) || d.iter().all(|x| *x <= 0.0);
    let q = (d[1] / d[0]).abs().max((d[2] / d[1]).abs());
    same_sign && q <= th.shrink_ratio && d[2].abs() * q / (1.0 - q) < th.tail_tol * scale
}

/// Whether each of the last three steps grows by at least `1/shrink_ratio`.
fn growing(logs: &[f64], th: &Thresholds) -> bool {
    let n = logs.len();
    n >= 4 && logs[n - 4..].windows(2).all(|w| w[1] - w[0] >= -th.shrink_ratio.ln())
}

pub fn detect_limit(trace: &DiskTrace) -> LimitVerdict {
    detect_limit_with(trace, &Thresholds::default())
}

pub fn detect_limit_with(trace: &DiskTrace, th: &Thresholds) -> LimitVerdict {
    if trace.points.len() < th.min_points {
        return LimitVerdict::Inconclusive;
    }
    let last = trace.points.last().expect("non-empty trace");
    match last.set.shape {
        WeylShape::Disk { center, radius, .. } => {
            let logs: Vec<f64> = trace
                .points
                .iter()
                .filter_map(|t| match t.set.shape {
                    WeylShape::Disk { log_radius, .. } => Some(log_radius),
                    _ => None,
                })
                .collect();
            let neg: Vec<f64> = logs.iter().map(|l| -l).collect();
            let n = logs.len();
            if n >= 4 && logs[n - 1] - logs[0] < th.point_drop.ln() && growing(&neg, th) {
                LimitVerdict::LimitPoint { m0: center }
            } else if converged(&logs, 1.0, th) && radius > th.min_radius {
                LimitVerdict::LimitCircle { center, radius }
            } else {
                LimitVerdict::Inconclusive
            }
        }
        WeylShape::HalfPlane { im_level, .. } => {
            let levels: Vec<f64> = trace
                .points
                .iter()
                .map(|t| match t.set.shape {
                    WeylShape::HalfPlane { im_level, .. } => im_level,
                    _ => f64::NAN,
                })
                .collect();
            let n = levels.len();
            let scale = levels[n - 1].abs().max(levels[n - 3].abs()).max(f64::MIN_POSITIVE);
            let logs_phi: Vec<f64> = trace.points.iter().map(|t| t.log_phi_norm_sq).collect();
            if converged(&levels, scale, th) {
                LimitVerdict::HalfPlaneLimit { level: im_level }
            } else if growing(&logs_phi, th) {
                LimitVerdict::EmptyLimit
            } else {
                LimitVerdict::Inconclusive
            }
        }
    }
}

/// Behaviour of `c ↦ ‖u‖²_c` along the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum NormTrend {
    Zero,
    Converges,
    Diverges,
    Undetermined,
}

impl NormTrend {
    pub fn is_finite(self) -> Option<bool> {
        match self {
            NormTrend::Zero | NormTrend::Converges => Some(true),
            NormTrend::Diverges => Some(false),
            NormTrend::Undetermined => None,
        }
    }
}

pub fn norm_trend(log_norms: &[f64], th: &Thresholds) -> NormTrend {
    if log_norms.len() < th.min_points.max(4) {
        NormTrend::Undetermined
    } else if converged(log_norms, 1.0, th) {
        NormTrend::Converges
    } else if growing(log_norms, th) {
        NormTrend::Diverges
    } else {
        NormTrend::Undetermined
    }
}

fn psi_trend(trace: &DiskTrace, th: &Thresholds) -> NormTrend {
    match trace.last().map(|t| t.set.shape) {
        Some(WeylShape::HalfPlane { .. }) => NormTrend::Zero,
        _ => norm_trend(&log_series(trace, |t| t.log_psi_norm_sq), th),
    }
}

fn log_series(trace: &DiskTrace, f: impl Fn(&TracePoint) -> f64) -> Vec<f64> {
    trace.points.iter().map(f).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum TauTrend {
    ToZero,
    ToInfinity,
    BoundedAway,
    Oscillating,
}

/// Trend of `|τ(c, λ)|`: monotone over the last three points and beyond
/// `10^{±6}`, or staying within those bounds and settled.
pub fn tau_trend(trace: &DiskTrace, th: &Thresholds) -> TauTrend {
    let logs = log_series(trace, |t| t.log_tau.re);
    let n = logs.len();
    let bound = 1e6f64.ln();
    if n < 3 {
        return TauTrend::Oscillating;
    }
    let tail = &logs[n - 3..];
    let decreasing = tail.windows(2).all(|w| w[1] < w[0]);
    let increasing = tail.windows(2).all(|w| w[1] > w[0]);
    if decreasing && logs[n - 1] < -bound {
        TauTrend::ToZero
    } else if increasing && logs[n - 1] > bound {
        TauTrend::ToInfinity
    } else if logs.iter().all(|l| l.abs() < bound)
        && converged(&logs, 1.0, th)
    {
        TauTrend::BoundedAway
    } else {
        TauTrend::Oscillating
    }
}

/// Least-squares slope of `log ‖u‖²_c` against `c` over the second half of
/// the trace.
pub fn growth_exponent(cs: &[f64], logs: &[f64]) -> Option<f64> {
    let start = cs.len() / 2;
    let (xs, ys) = (&cs[start..], &logs[start..]);
    if xs.len() < 2 || ys.iter().any(|y| !y.is_finite()) {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Definiteness {
    pub definite: bool,
    pub dim_null: u8,
    /// Initial value `u(0)` of the null-norm solution, normalised.
    #[serde(serialize_with = "serialize_vec2_opt")]
    pub null_vector: Option<Vec2>,
    pub min_eigenvalue: f64,
    pub trace: f64,
    pub c_max: f64,
}

fn serialize_vec2_opt<S: Serializer>(v: &Option<Vec2>, s: S) -> Result<S::Ok, S::Error> {
    v.map(|v| [[v[0].re, v[0].im], [v[1].re, v[1].im]]).serialize(s)
}

/// Decides `dim ℒ₀` from the Gram matrix of `U(·, 0)` on `(0, c_max)`.
pub fn definiteness(p: &Problem, c_max: f64) -> Result<Definiteness, PropagationError> {
    let g = kernel_gram(p, c_max)?;
    let definite = g.min_eigenvalue > 1e-10 * g.trace;
    Ok(Definiteness {
        definite,
        dim_null: if definite { 0 } else { 1 },
        null_vector: (!definite).then(|| g.min_solution_initial_value(p)),
        min_eigenvalue: g.min_eigenvalue,
        trace: g.trace,
        c_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Diagnostics {
    pub c_max: f64,
    pub grid_points: usize,
    pub final_radius: Option<f64>,
    pub final_radius_conj: Option<f64>,
    /// `r(c_k)/r(c_{k−1})` over the last three steps at λ.
    pub radius_ratios: Vec<f64>,
    pub psi_growth_exponent: Option<f64>,
    pub psi_growth_exponent_conj: Option<f64>,
    pub phi_growth_exponent: Option<f64>,
    pub psi_norm: NormTrend,
    pub psi_norm_conj: NormTrend,
    pub phi_norm: NormTrend,
    /// Whether the indices agree with the τ-trend requirement for unequal
    /// indices.
    pub tau_consistent: bool,
    pub caveat: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassificationReport {
    pub schema: &'static str,
    #[serde(serialize_with = "serialize_complex")]
    pub lambda: C64,
    pub verdict: LimitVerdict,
    pub verdict_conj: LimitVerdict,
    #[serde(flatten)]
    pub definiteness: Definiteness,
    /// Index for the upper half-plane.
    pub n_plus: Option<u8>,
    /// Index for the lower half-plane.
    pub n_minus: Option<u8>,
    pub n_at_lambda: Option<u8>,
    pub n_at_conj: Option<u8>,
    pub tau_trend: TauTrend,
    pub tau_trend_conj: TauTrend,
    pub all_solutions_l2: Option<bool>,
    pub diagnostics: Diagnostics,
}

impl ClassificationReport {
    pub fn is_conclusive(&self) -> bool {
        self.n_plus.is_some() && self.n_minus.is_some()
    }
}

pub fn deficiency_indices(p: &Problem, lambda: C64) -> Result<ClassificationReport, ClassifyError> {
    deficiency_indices_on(p, lambda, &default_grid(p.b), &Thresholds::default())
}

/// `2 − dim ℒ₀` when `ψ` has finite positive norm, `1 − dim ℒ₀` when it
/// diverges; on the half-plane branch, 1 or 0 as the limit set is non-empty
/// or empty.
fn index_for(trend: NormTrend, verdict: LimitVerdict, dim_null: u8) -> Option<u8> {
    match trend {
        NormTrend::Zero => match verdict {
            LimitVerdict::HalfPlaneLimit { .. } => Some(1),
            LimitVerdict::EmptyLimit => Some(0),
            _ => None,
        },
        NormTrend::Converges => Some(2 - dim_null),
        NormTrend::Diverges => 1u8.checked_sub(dim_null),
        NormTrend::Undetermined => None,
    }
}

/// Deficiency indices from traces at `λ` and `λ̄` and the definiteness of
/// the problem. `n_plus` always refers to the upper half-plane.
pub fn deficiency_indices_on(
    p: &Problem,
    lambda: C64,
    grid: &[f64],
    th: &Thresholds,
) -> Result<ClassificationReport, ClassifyError> {
    if lambda.im == 0.0 {
        return Err(WeylError::RealLambda(lambda).into());
    }
    let grid = avoid_atoms(p, grid);
    let c_max = *grid
        .last()
        .ok_or_else(|| ClassifyError::Inconclusive("empty grid".into()))?;
    let ((here, there), def) = rayon::join(
        || {
            rayon::join(
                || trace_disks(p, lambda, &grid),
                || trace_disks(p, lambda.conj(), &grid),
            )
        },
        || definiteness(p, c_max),
    );
    let (here, there, def) = (here?, there?, def?);

    let verdict = detect_limit_with(&here, th);
    let verdict_conj = detect_limit_with(&there, th);
    let psi_norm = psi_trend(&here, th);
    let psi_norm_conj = psi_trend(&there, th);
    let phi_norm = norm_trend(&log_series(&here, |t| t.log_phi_norm_sq), th);
    let tau_here = tau_trend(&here, th);
    let tau_there = tau_trend(&there, th);

    let mut n_here = index_for(psi_norm, verdict, def.dim_null);
    let mut n_there = index_for(psi_norm_conj, verdict_conj, def.dim_null);
    let tau_consistent = match (n_here, n_there) {
        (Some(a), Some(b)) if a != b => matches!(
            (tau_here, tau_there),
            (TauTrend::ToZero, TauTrend::ToInfinity) | (TauTrend::ToInfinity, TauTrend::ToZero)
        ),
        _ => true,
    };
    if !tau_consistent {
        n_here = None;
        n_there = None;
    }
    let (n_plus, n_minus) = if lambda.im > 0.0 {
        (n_here, n_there)
    } else {
        (n_there, n_here)
    };
    let all_solutions_l2 = match (psi_norm.is_finite(), phi_norm.is_finite()) {
        (Some(a), Some(b)) => Some(a && b),
        (Some(false), None) | (None, Some(false)) => Some(false),
        _ => None,
    };

    let cs = log_series(&here, |t| t.c);
    let radius = |t: &DiskTrace| match t.last()?.set.shape {
        WeylShape::Disk { radius, .. } => Some(radius),
        _ => None,
    };
    let log_radii: Vec<f64> = here
        .points
        .iter()
        .filter_map(|t| match t.set.shape {
            WeylShape::Disk { log_radius, .. } => Some(log_radius),
            _ => None,
        })
        .collect();
    let radius_ratios = log_radii
        .windows(2)
        .rev()
        .take(3)
        .map(|w| (w[1] - w[0]).exp())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    let diagnostics = Diagnostics {
        c_max,
        grid_points: grid.len(),
        final_radius: radius(&here),
        final_radius_conj: radius(&there),
        radius_ratios,
        psi_growth_exponent: growth_exponent(&cs, &log_series(&here, |t| t.log_psi_norm_sq)),
        psi_growth_exponent_conj: growth_exponent(
            &cs,
            &log_series(&there, |t| t.log_psi_norm_sq),
        ),
        phi_growth_exponent: growth_exponent(&cs, &log_series(&here, |t| t.log_phi_norm_sq)),
        psi_norm,
        psi_norm_conj,
        phi_norm,
        tau_consistent,
        caveat: format!("limits judged on (0, {c_max}); definiteness checked up to {c_max}"),
    };
    Ok(ClassificationReport {
        schema: REPORT_SCHEMA,
        lambda,
        verdict,
        verdict_conj,
        definiteness: def,
        n_plus,
        n_minus,
        n_at_lambda: n_here,
        n_at_conj: n_there,
        tau_trend: tau_here,
        tau_trend_conj: tau_there,
        all_solutions_l2,
        diagnostics,
    })
}

/// Whether every solution at `λ` has finite norm, judged by convergence of
/// `‖φ‖²_c` and `‖ψ‖²_c` along the default grid.
pub fn all_solutions_l2(p: &Problem, lambda: C64) -> Result<bool, ClassifyError> {
    let th = Thresholds::default();
    let trace = trace_disks(p, lambda, &default_grid(p.b))?;
    let psi = norm_trend(&log_series(&trace, |t| t.log_psi_norm_sq), &th);
    let phi = norm_trend(&log_series(&trace, |t| t.log_phi_norm_sq), &th);
    match (psi.is_finite(), phi.is_finite()) {
        (Some(a), Some(b)) => Ok(a && b),
        (Some(false), _) | (_, Some(false)) => Ok(false),
        _ => Err(ClassifyError::Inconclusive(format!(
            "norm trends psi: {psi:?}, phi: {phi:?}"
        ))),
    }
}

/// `‖χ_m‖²_c` along a trace for a fixed `m`, for checking that some
/// solution has finite norm.
pub fn chi_norms(trace: &DiskTrace, m: C64) -> Vec<f64> {
    trace.points.iter().map(|t| chi_norm_sq(&t.sample, m)).collect()
}
