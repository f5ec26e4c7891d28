use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use satindex_core::Error;
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Resolved settings of a run, echoed into every output.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rays: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    pub output_path: String,
}

impl RunConfig {
    pub fn new(command: &str, out: Option<&Path>) -> Self {
        Self {
            command: command.to_string(),
            output_path: out.map_or_else(|| "-".to_string(), |p| p.display().to_string()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub status: &'static str,
    pub result: T,
}

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn failed(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CHECK_FAILED,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Parse(_) => Self::usage(e.to_string()),
            _ => Self::failed(e.to_string()),
        }
    }
}

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::usage(format!("{}: {e}", path.display()))
}

/// Writes `value` as pretty JSON to `out`, or to standard output.
pub fn emit<T: Serialize>(out: Option<&PathBuf>, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::failed(e.to_string()))?;
    text.push('\n');
    write_text(out, &text)
}

pub fn write_text(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| io_error(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::failed(e.to_string())),
    }
}

/// Parses a comma-separated vector; surrounding spaces are ignored.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, CliError> {
    text.trim()
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::usage(format!("invalid vector entry {s:?} in {text:?}")))
        })
        .collect()
}
