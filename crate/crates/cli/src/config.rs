//! Run parameters from three layers: built-in defaults, a `key = value`
//! config file, and command-line flags (highest precedence).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use cosparse::OperatorKind;
use serde::Serialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tv,
    Tikhonov,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OpArg {
    Diff1d,
    Diff2d,
    Frame,
}

impl From<OpArg> for OperatorKind {
    fn from(op: OpArg) -> Self {
        match op {
            OpArg::Diff1d => OperatorKind::Diff1d,
            OpArg::Diff2d => OperatorKind::Diff2d,
            OpArg::Frame => OperatorKind::Frame,
        }
    }
}

/// Comma-separated list of numbers, e.g. `1,1.3`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|part| {
                part.trim()
                    .parse::<T>()
                    .map_err(|e| format!("bad list entry {part:?}: {e}"))
            })
            .collect::<Result<Vec<T>, String>>()
            .map(List)
    }
}

macro_rules! params {
    ($( $(#[$meta:meta])* $name:ident : $ty:ty ),* $(,)?) => {
        /// Every parameter a command can take. Unset values fall back to the
        /// config file and then to the command's defaults.
        #[derive(Clone, Debug, Default, Args, Serialize)]
        pub struct Params {
            $( $(#[$meta])* #[arg(long, global = true)] pub $name: Option<$ty>, )*
        }

        impl Params {
            /// Fills unset values from `key = value` pairs.
            fn fill_from(&mut self, pairs: Vec<(usize, String, String)>, path: &Path) -> Result<(), CliError> {
                for (line, key, value) in pairs {
                    match key.as_str() {
                        $( stringify!($name) => {
                            if self.$name.is_none() {
                                self.$name = Some(parse_value::<$ty>(&value).map_err(|e| {
                                    CliError::Usage(format!("{}:{line}: {key}: {e}", path.display()))
                                })?);
                            }
                        } )*
                        _ => {
                            return Err(CliError::Usage(format!(
                                "{}:{line}: unknown key {key:?}",
                                path.display()
                            )))
                        }
                    }
                }
                Ok(())
            }
        }
    };
}

fn parse_value<T: ValueOrStr>(s: &str) -> Result<T, String> {
    T::parse(s)
}

/// Parsing of config-file values: clap value enums by name, everything else
/// through `FromStr`.
trait ValueOrStr: Sized {
    fn parse(s: &str) -> Result<Self, String>;
}

macro_rules! from_str_values {
    ($($ty:ty),*) => {$(
        impl ValueOrStr for $ty {
            fn parse(s: &str) -> Result<Self, String> {
                s.parse::<$ty>().map_err(|e| e.to_string())
            }
        }
    )*};
}
from_str_values!(usize, u64, f64, bool, PathBuf, List<usize>, List<f64>);

macro_rules! enum_values {
    ($($ty:ty),*) => {$(
        impl ValueOrStr for $ty {
            fn parse(s: &str) -> Result<Self, String> {
                <$ty as ValueEnum>::from_str(s, false)
            }
        }
    )*};
}
enum_values!(Method, Preset, OpArg);

params! {
    /// Analysis operator
    op: OpArg,
    /// Signal dimension (for frames: dimension of the signal space)
    d: usize,
    /// Image side length for the 2D difference operator
    side: usize,
    /// Number of nonzero analysis coefficients
    s: usize,
    /// Number of measurements
    m: usize,
    /// Number of frame rows
    p: usize,
    /// Noise level bound in the constraint ||Mz - y|| <= eta
    eta: f64,
    /// Norm of the noise injected into generated measurements
    noise: f64,
    /// Failure probability of the bound
    eps: f64,
    /// Robustness margin of the bound
    tau: f64,
    /// Trials per experiment cell
    trials: usize,
    /// Relative error counted as exact recovery
    threshold: f64,
    /// Monte-Carlo samples (for figure1: points on each curve)
    samples: usize,
    /// Solver stopping tolerance
    tol: f64,
    /// Solver iteration cap
    max_iters: usize,
    /// Reconstruction method
    method: Method,
    /// Phase-transition grid preset
    preset: Preset,
    /// Sparsity values of the phase grid, comma separated
    s_values: List<usize>,
    /// Measurement counts of the phase grid, comma separated
    m_values: List<usize>,
    /// Frame redundancies p/d for figure1, comma separated
    kappas: List<f64>,
    /// Use a tight unit-norm frame (A = B = p/d) in `bound`
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    unit_tight: bool,
    /// Emit a bound-vs-parameter CSV; only `s` is supported
    sweep: String,
    /// Signal CSV for `recover` (one value per line)
    signal: PathBuf,
    /// Measurement matrix CSV for `recover`
    matrix: PathBuf,
    /// Base seed of all random streams [default: 20140419]
    seed: u64,
    /// Worker threads [default: available cores]
    #[arg(env = "COSPARSE_JOBS")]
    jobs: usize,
    /// Output directory; must be missing or empty unless --force
    out: PathBuf,
    /// Allow writing into a non-empty output directory
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    force: bool,
}

impl ValueOrStr for String {
    fn parse(s: &str) -> Result<Self, String> {
        Ok(s.to_string())
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are
/// skipped, and keys may use `-` or `_`.
pub fn parse_config_text(text: &str, path: &Path) -> Result<Vec<(usize, String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                i + 1
            )));
        };
        out.push((i + 1, key.trim().replace('-', "_"), value.trim().to_string()));
    }
    Ok(out)
}

impl Params {
    pub fn merge_config_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let pairs = parse_config_text(&text, path)?;
        self.fill_from(pairs, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_fills_only_unset_values() {
        let mut p = Params {
            d: Some(7),
            ..Params::default()
        };
        let pairs = parse_config_text("d = 3\n# comment\ns = 2 # trailing\nmax-iters=9\nop = frame\n", Path::new("x")).unwrap();
        p.fill_from(pairs, Path::new("x")).unwrap();
        assert_eq!(p.d, Some(7));
        assert_eq!(p.s, Some(2));
        assert_eq!(p.max_iters, Some(9));
        assert_eq!(p.op, Some(OpArg::Frame));
    }

    #[test]
    fn unknown_and_malformed_keys_are_rejected() {
        let mut p = Params::default();
        let pairs = parse_config_text("colour = red\n", Path::new("x")).unwrap();
        assert!(matches!(p.fill_from(pairs, Path::new("x")), Err(CliError::Usage(_))));
        assert!(parse_config_text("just words\n", Path::new("x")).is_err());
        let pairs = parse_config_text("d = many\n", Path::new("x")).unwrap();
        assert!(p.fill_from(pairs, Path::new("x")).is_err());
    }

    #[test]
    fn lists_parse() {
        let l: List<f64> = "1, 1.3".parse().unwrap();
        assert_eq!(l.0, vec![1.0, 1.3]);
        assert!("1,x".parse::<List<usize>>().is_err());
    }
}
