//! Report envelopes, error taxonomy and exit codes.

use std::process::ExitCode;

use clap::ValueEnum;
use pontryagin::io::SystemFile;
use pontryagin::{Error, ErrorKind};
use serde_json::{json, Value};

use crate::Global;

pub const REPORT_VERSION: u32 = 1;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

/// What a command produced.
pub enum Outcome {
    /// A system file; written as JSON in both formats so pipelines keep working.
    System(SystemFile),
    Systems(Vec<SystemFile>),
    /// `passed = false` maps to the check-failed exit code.
    Report {
        passed: bool,
        summary: String,
        result: Value,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn input(code: &'static str, message: impl Into<String>) -> Self {
        CliError { code, kind: ErrorKind::Input, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError { code: e.code(), kind: e.kind(), message: e.to_string() }
    }
}

fn kind_name(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Input => "input",
        ErrorKind::Numerical => "numerical",
        ErrorKind::Check => "check",
    }
}

pub fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Input => EXIT_INPUT,
        ErrorKind::Numerical => EXIT_NUMERICAL,
        ErrorKind::Check => EXIT_CHECK_FAILED,
    }
}

fn text_lines(result: &Value) -> Vec<String> {
    let Value::Object(map) = result else { return Vec::new() };
    map.iter()
        .filter(|(_, v)| !v.is_object() && !v.is_array())
        .map(|(k, v)| match v {
            Value::String(s) => format!("{k}: {s}"),
            other => format!("{k}: {other}"),
        })
        .collect()
}

/// Renders the outcome, writes it to `--out` or standard output, and returns the exit code.
pub fn emit(command: &str, result: Result<Outcome, CliError>, global: &Global) -> Result<ExitCode, CliError> {
    let (text, code) = match result {
        Ok(Outcome::System(file)) => (file.to_json(), EXIT_OK),
        Ok(Outcome::Systems(files)) => {
            let values: Vec<Value> =
                files.iter().map(|f| serde_json::to_value(f).expect("system files serialize")).collect();
            (pretty(&Value::Array(values)), EXIT_OK)
        }
        Ok(Outcome::Report { passed, summary, result }) => {
            let code = if passed { EXIT_OK } else { EXIT_CHECK_FAILED };
            let text = match global.format {
                Format::Json => pretty(&json!({
                    "format_version": REPORT_VERSION,
                    "command": command,
                    "status": if passed { "ok" } else { "check_failed" },
                    "summary": summary,
                    "result": result,
                })),
                Format::Text => {
                    let mut lines = vec![summary];
                    lines.extend(text_lines(&result));
                    lines.join("\n") + "\n"
                }
            };
            (text, code)
        }
        Err(err) => {
            let code = exit_code(err.kind);
            match global.format {
                Format::Json => {
                    eprintln!("error[{}]: {}", err.code, err.message);
                    let text = pretty(&json!({
                        "format_version": REPORT_VERSION,
                        "command": command,
                        "status": "error",
                        "error": { "code": err.code, "kind": kind_name(err.kind), "message": err.message },
                    }));
                    (text, code)
                }
                Format::Text => {
                    eprintln!("error[{}]: {}", err.code, err.message);
                    return Ok(ExitCode::from(code));
                }
            }
        }
    };
    match &global.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::input("io_error", format!("{}: {e}", path.display())))?
        }
        None => print!("{text}"),
    }
    Ok(ExitCode::from(code))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}
