use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use weyl_canon::C64;

#[derive(Debug, Parser)]
#[command(name = "weyl-canon", version, about = "Weyl–Titchmarsh theory for canonical systems with measure coefficients")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a problem file.
    Validate(Source),
    /// Weyl disks or half-planes along a grid of truncation points.
    Disks(RunArgs),
    /// τ(x, λ) along a grid.
    Tau(RunArgs),
    /// Limit behaviour, definiteness and deficiency indices.
    Classify(ClassifyArgs),
    /// Adaptive propagation against the fixed-step reference integrator.
    OracleCompare(OracleArgs),
    /// List the built-in examples, or print one as a problem file.
    Example {
        name: Option<String>,
    },
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Problem file (JSON).
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Built-in example, e.g. `constant_w` or `lesch_malamud(a=1)`.
    #[arg(long)]
    pub example: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// First grid point; defaults to min(1, b/10).
    #[arg(long)]
    pub c0: Option<f64>,
    /// Grid ratio.
    #[arg(long, default_value_t = 1.5)]
    pub rho: f64,
    /// Number of grid points.
    #[arg(long, default_value_t = 24)]
    pub count: usize,
    /// Drop grid points beyond this.
    #[arg(long)]
    pub cmax: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    /// Spectral parameter as `a+bi` or `a,b`.
    #[arg(long, value_parser = parse_lambda, allow_hyphen_values = true)]
    pub lambda: C64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub source: Source,
    /// Spectral parameter as `a+bi` or `a,b`; repeat for several values.
    #[arg(long, value_parser = parse_lambda, allow_hyphen_values = true, required = true)]
    pub lambda: Vec<C64>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with status 5 when an index is inconclusive.
    #[arg(long)]
    pub strict: bool,
    /// Shrink ratio for the limit-point trend.
    #[arg(long, default_value_t = 0.9)]
    pub shrink_ratio: f64,
    /// Relative change over the last three points that counts as converged.
    #[arg(long, default_value_t = 1e-4)]
    pub settle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Midpoint,
    Rk4,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Fixed step of the reference integrator.
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    #[arg(long, value_enum, default_value_t = Method::Rk4)]
    pub method: Method,
}

/// Accepts `a,b`, `a+bi`, `a-bi`, `bi`, `i`, `-i` and plain reals.
pub fn parse_lambda(text: &str) -> Result<C64, String> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot parse `{text}` as a complex number (use `a+bi` or `a,b`)");
    let real = |s: &str| s.parse::<f64>().map_err(|_| bad());
    if let Some((re, im)) = t.split_once(',') {
        return Ok(C64::new(real(re)?, real(im)?));
    }
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return Ok(C64::new(real(&t)?, 0.0));
    };
    // The imaginary part starts at the last sign that is not an exponent sign.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let coefficient = |s: &str| match s {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        _ => real(s),
    };
    match split {
        Some(k) => Ok(C64::new(real(&body[..k])?, coefficient(&body[k..])?)),
        None => Ok(C64::new(0.0, coefficient(body)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lambda_forms() {
        let cases = [
            ("i", C64::new(0.0, 1.0)),
            ("-i", C64::new(0.0, -1.0)),
            ("2i", C64::new(0.0, 2.0)),
            ("1+2i", C64::new(1.0, 2.0)),
            ("1-2i", C64::new(1.0, -2.0)),
            ("-0.5+0.25i", C64::new(-0.5, 0.25)),
            ("1e-3-2e+1i", C64::new(1e-3, -20.0)),
            ("0.3,-1", C64::new(0.3, -1.0)),
            (" 1 , 2 ", C64::new(1.0, 2.0)),
            ("3", C64::new(3.0, 0.0)),
            ("1-i", C64::new(1.0, -1.0)),
        ];
        for (text, z) in cases {
            assert_eq!(parse_lambda(text), Ok(z), "{text}");
        }
        for text in ["", "i+1", "1+2k", "a,b", "1,2,3"] {
            assert!(parse_lambda(text).is_err(), "{text}");
        }
    }

    proptest! {
        #[test]
        fn printed_complex_numbers_parse_back(re in -1e6..1e6f64, im in -1e6..1e6f64) {
            let z = C64::new(re, im);
            prop_assert_eq!(parse_lambda(&format!("{re}{im:+}i")), Ok(z));
            prop_assert_eq!(parse_lambda(&format!("{re:e}{im:+e}i")), Ok(z));
            prop_assert_eq!(parse_lambda(&format!("{re},{im}")), Ok(z));
        }
    }
}
