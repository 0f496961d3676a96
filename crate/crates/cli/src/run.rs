use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use weyl_canon::classify::{
    deficiency_indices_on, trace_disks, ClassificationReport, ClassifyError, GridSpec, Thresholds,
};
use weyl_canon::oracle::{
    compare, fixed_step_propagate_on, relative_deviation, OracleConfig, OracleError, OracleMethod,
};
use weyl_canon::problem::{
    builtin_example, parse_problem, serialize_problem, CatalogEntry, ClosedFormRecord,
    CATALOG_NAMES,
};
use weyl_canon::propagator::{fundamental_matrix_on, PropagationError};
use weyl_canon::weyl::{WeylError, WeylShape};
use weyl_canon::{Problem, ProblemError, C64};

use crate::args::{ClassifyArgs, Cli, Command, Format, GridArgs, Method, OracleArgs, RunArgs, Source};

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_BAD_POINT: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;
pub const EXIT_INCONCLUSIVE: u8 = 5;

pub const DISK_HEADER: [&str; 9] = [
    "c",
    "re_center",
    "im_center",
    "radius",
    "branch",
    "re_tau",
    "im_tau",
    "psi_norm_sq",
    "phi_norm_sq",
];

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl From<ProblemError> for Failure {
    fn from(e: ProblemError) -> Self {
        Failure::validation(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::validation(e.to_string())
    }
}

impl From<PropagationError> for Failure {
    fn from(e: PropagationError) -> Self {
        match e {
            PropagationError::BadPoint(report) => {
                let json = serde_json::to_string_pretty(&report).unwrap_or_default();
                println!("{json}");
                Failure {
                    code: EXIT_BAD_POINT,
                    message: format!(
                        "lambda = {} is in the bad set: {}",
                        fmt_complex(report.lambda),
                        report.describe()
                    ),
                }
            }
            other => Failure::numerical(other.to_string()),
        }
    }
}

impl From<WeylError> for Failure {
    fn from(e: WeylError) -> Self {
        match e {
            WeylError::Propagation(p) => p.into(),
            WeylError::RealLambda(_) => Failure::validation(e.to_string()),
            other => Failure::numerical(other.to_string()),
        }
    }
}

impl From<ClassifyError> for Failure {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::Weyl(w) => w.into(),
            ClassifyError::Inconclusive(m) => Failure::numerical(m),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Propagation(p) => p.into(),
            other => Failure::validation(other.to_string()),
        }
    }
}

/// Sizes the global thread pool from `WEYL_CANON_THREADS`.
pub fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("WEYL_CANON_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("WEYL_CANON_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

pub fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Validate(source) => validate(source),
        Command::Disks(args) => disks(args),
        Command::Tau(args) => tau(args),
        Command::Classify(args) => classify(args),
        Command::OracleCompare(args) => oracle_compare(args),
        Command::Example { name } => example(name.as_deref()),
    }
}

fn load(source: &Source) -> Result<(Problem, Option<ClosedFormRecord>), Failure> {
    match (&source.problem, &source.example) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
            Ok((parse_problem(&text)?, None))
        }
        (None, Some(name)) => {
            let (p, record) = builtin_example(name)?;
            Ok((p, Some(record)))
        }
        (None, None) => Err(Failure::validation("give --problem or --example")),
    }
}

fn grid_points(grid: &GridArgs, b: f64) -> Result<Vec<f64>, Failure> {
    if !(grid.rho > 1.0) || grid.count == 0 || grid.c0.is_some_and(|c| !(c > 0.0)) {
        return Err(Failure::validation(
            "grid parameters must be positive, with rho > 1",
        ));
    }
    let spec = GridSpec {
        c0: grid.c0,
        rho: grid.rho,
        count: grid.count,
        c_max: grid.cmax,
    };
    let points = spec.points(b);
    if points.is_empty() {
        return Err(Failure::validation("the grid has no points inside (0, b)"));
    }
    Ok(points)
}

fn require_nonreal(lambda: C64) -> Result<(), Failure> {
    if lambda.im == 0.0 {
        Err(Failure::validation(format!(
            "lambda must be non-real, got {}",
            fmt_complex(lambda)
        )))
    } else {
        Ok(())
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::validation(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    s.push('\n');
    s
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("CSV is UTF-8")
}

fn fmt_complex(z: C64) -> String {
    if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn validate(source: &Source) -> Result<u8, Failure> {
    let (p, _) = load(source)?;
    println!(
        "ok: b = {}, alpha = {}, {} jump point(s), {} break(s)",
        p.b,
        p.alpha,
        p.jump_points().len(),
        p.breaks().len()
    );
    Ok(0)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DiskRow {
    c: f64,
    #[serde(flatten)]
    shape: WeylShape,
    #[serde(serialize_with = "weyl_canon::classify::serialize_complex")]
    tau: C64,
    psi_norm_sq: f64,
    phi_norm_sq: f64,
}

fn disks(args: &RunArgs) -> Result<u8, Failure> {
    let (p, _) = load(&args.source)?;
    require_nonreal(args.lambda)?;
    let grid = grid_points(&args.grid, p.b)?;
    let trace = trace_disks(&p, args.lambda, &grid)?;
    let text = match args.format {
        Format::Json => to_json(
            &trace
                .points
                .iter()
                .map(|t| DiskRow {
                    c: t.c,
                    shape: t.set.shape,
                    tau: t.tau,
                    psi_norm_sq: t.psi_norm_sq,
                    phi_norm_sq: t.phi_norm_sq,
                })
                .collect::<Vec<_>>(),
        ),
        Format::Csv => csv_text(
            &DISK_HEADER,
            trace
                .points
                .iter()
                .map(|t| {
                    let (re, im, r, branch) = match t.set.shape {
                        WeylShape::Disk { center, radius, .. } => {
                            (num(center.re), num(center.im), num(radius), "disk")
                        }
                        WeylShape::HalfPlane { im_level, .. } => {
                            (String::new(), num(im_level), String::new(), "halfplane")
                        }
                    };
                    vec![
                        num(t.c),
                        re,
                        im,
                        r,
                        branch.into(),
                        num(t.tau.re),
                        num(t.tau.im),
                        num(t.psi_norm_sq),
                        num(t.phi_norm_sq),
                    ]
                })
                .collect(),
        ),
    };
    emit(args.out.as_deref(), &text)?;
    Ok(0)
}

#[derive(Serialize)]
struct TauRow {
    x: f64,
    re_tau: f64,
    im_tau: f64,
    abs_tau: f64,
}

fn tau(args: &RunArgs) -> Result<u8, Failure> {
    let (p, _) = load(&args.source)?;
    let grid = grid_points(&args.grid, p.b)?;
    let grid = weyl_canon::classify::avoid_atoms(&p, &grid);
    let rows: Vec<TauRow> = weyl_canon::weyl::tau_on(&p, args.lambda, &grid)?
        .iter()
        .map(|t| TauRow {
            x: t.x,
            re_tau: t.tau.re,
            im_tau: t.tau.im,
            abs_tau: t.log_tau.re.exp(),
        })
        .collect();
    let text = match args.format {
        Format::Json => to_json(&rows),
        Format::Csv => csv_text(
            &["x", "re_tau", "im_tau", "abs_tau"],
            rows.iter()
                .map(|r| vec![num(r.x), num(r.re_tau), num(r.im_tau), num(r.abs_tau)])
                .collect(),
        ),
    };
    emit(args.out.as_deref(), &text)?;
    Ok(0)
}

fn classify(args: &ClassifyArgs) -> Result<u8, Failure> {
    let (p, _) = load(&args.source)?;
    for &lambda in &args.lambda {
        require_nonreal(lambda)?;
    }
    let grid = grid_points(&args.grid, p.b)?;
    let th = Thresholds {
        shrink_ratio: args.shrink_ratio,
        settle: args.settle,
        ..Thresholds::default()
    };
    let reports: Vec<ClassificationReport> = args
        .lambda
        .par_iter()
        .map(|&lambda| deficiency_indices_on(&p, lambda, &grid, &th))
        .collect::<Result<_, _>>()?;
    let text = if reports.len() == 1 {
        to_json(&reports[0])
    } else {
        to_json(&reports)
    };
    emit(args.out.as_deref(), &text)?;
    if args.strict && reports.iter().any(|r| !r.is_conclusive()) {
        eprintln!("error: inconclusive deficiency indices");
        return Ok(EXIT_INCONCLUSIVE);
    }
    Ok(0)
}

#[derive(Serialize)]
struct OracleRow {
    c: f64,
    matrix_deviation: f64,
    gram_deviation: f64,
    tau_deviation: f64,
    closed_form_deviation: Option<f64>,
}

fn oracle_compare(args: &OracleArgs) -> Result<u8, Failure> {
    let run = &args.run;
    let (p, record) = load(&run.source)?;
    let mut grid_args = run.grid.clone();
    grid_args.cmax = Some(grid_args.cmax.unwrap_or(5.0));
    let grid = weyl_canon::classify::avoid_atoms(&p, &grid_points(&grid_args, p.b)?);
    let cfg = OracleConfig {
        step: args.step,
        method: match args.method {
            Method::Midpoint => OracleMethod::Midpoint,
            Method::Rk4 => OracleMethod::Rk4Fixed,
        },
    };
    let (adaptive, reference) = rayon::join(
        || fundamental_matrix_on(&p, run.lambda, &grid),
        || fixed_step_propagate_on(&p, run.lambda, &grid, &cfg),
    );
    let (adaptive, reference) = (adaptive?, reference?);
    let rows: Vec<OracleRow> = compare(&adaptive, &reference)
        .into_iter()
        .zip(&adaptive.samples)
        .map(|(d, s)| OracleRow {
            c: d.c,
            matrix_deviation: d.fundamental_matrix,
            gram_deviation: d.gram,
            tau_deviation: d.tau,
            closed_form_deviation: record
                .as_ref()
                .and_then(|r| r.fundamental_matrix(s.x, run.lambda))
                .map(|exact| relative_deviation(&s.value(), &exact)),
        })
        .collect();
    let text = match run.format {
        Format::Json => to_json(&rows),
        Format::Csv => csv_text(
            &[
                "c",
                "matrix_deviation",
                "gram_deviation",
                "tau_deviation",
                "closed_form_deviation",
            ],
            rows.iter()
                .map(|r| {
                    vec![
                        num(r.c),
                        num(r.matrix_deviation),
                        num(r.gram_deviation),
                        num(r.tau_deviation),
                        r.closed_form_deviation.map(num).unwrap_or_default(),
                    ]
                })
                .collect(),
        ),
    };
    emit(run.out.as_deref(), &text)?;
    Ok(0)
}

fn example(name: Option<&str>) -> Result<u8, Failure> {
    match name {
        None => {
            for name in CATALOG_NAMES {
                let entry = CatalogEntry::parse(name)?;
                let e = entry.expectation();
                let indices = e
                    .deficiency
                    .map(|(plus, minus)| format!("({plus}, {minus})"))
                    .unwrap_or_else(|| "-".into());
                let definite = e.definite.map_or("-".into(), |d| d.to_string());
                println!(
                    "{:<24} definite = {definite:<5} (n+, n-) = {indices}",
                    entry.name()
                );
            }
        }
        Some(name) => {
            let (p, _) = builtin_example(name)?;
            println!("{}", serialize_problem(&p));
        }
    }
    Ok(0)
}
