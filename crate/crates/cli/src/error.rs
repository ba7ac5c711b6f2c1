use std::path::Path;

use serde::Serialize;

use fgnest::graph::ParseError;
use fgnest::hypotheses::HypothesisError;
use fgnest::laplace::LaplaceError;
use fgnest::nested::NestedError;
use fgnest::samples::SampleError;

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_IO: i32 = 3;
pub const EXIT_PARSE: i32 = 4;
pub const EXIT_NOT_CONVERGED: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    Io { path: String, message: String },
    Parse { path: String, message: String },
    NotConverged(String),
    Invalid(String),
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn parse(path: &Path, message: impl ToString) -> Self {
        CliError::Parse {
            path: path.display().to_string(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_IO,
            CliError::Parse { .. } => EXIT_PARSE,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::Invalid(_) => EXIT_OTHER,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::NotConverged(_) => "not_converged",
            CliError::Invalid(_) => "invalid",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Io { path, message } | CliError::Parse { path, message } => format!("{path}: {message}"),
            CliError::NotConverged(m) | CliError::Invalid(m) => m.clone(),
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorReport {
            error: self.kind(),
            message: self.message(),
            exit_code: self.exit_code(),
        })
        .expect("error report serializes")
    }
}

pub fn graph_parse(path: &Path, e: ParseError) -> CliError {
    CliError::parse(path, e)
}

pub fn samples(path: &Path, e: SampleError) -> CliError {
    match e {
        SampleError::Io(io) => CliError::io(path, io),
        other => CliError::parse(path, other),
    }
}

pub fn nested(e: NestedError) -> CliError {
    match e {
        NestedError::Plateau { .. } => CliError::NotConverged(e.to_string()),
        other => CliError::Invalid(other.to_string()),
    }
}

pub fn laplace(e: LaplaceError) -> CliError {
    match e {
        LaplaceError::NotConverged => CliError::NotConverged(e.to_string()),
        other => CliError::Invalid(other.to_string()),
    }
}

pub fn hypotheses(e: HypothesisError) -> CliError {
    match e {
        HypothesisError::Nested {
            source: NestedError::Plateau { .. },
            ..
        } => CliError::NotConverged(e.to_string()),
        other => CliError::Invalid(other.to_string()),
    }
}
