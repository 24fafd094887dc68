use std::io;

use thiserror::Error;

use crate::domain::{AttributeKind, Violation};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{kind} value {value:?} is not in the vocabulary")]
    UnknownValue { kind: AttributeKind, value: String },

    #[error("{kind} code {code} is out of range for a vocabulary of size {size}")]
    CodeOutOfRange {
        kind: AttributeKind,
        code: u32,
        size: usize,
    },

    #[error("duplicate scenario id {0:?}")]
    DuplicateScenario(String),

    #[error("corpus too small: {0} samples, need at least 2")]
    CorpusTooSmall(usize),

    #[error("pattern id {0} is not covered by any partition range")]
    UncoveredPattern(u32),

    #[error("pattern id {0} is covered by more than one partition range")]
    OverlappingRanges(u32),

    #[error("pattern id {id} outside scaling range [{lo}, {hi}]")]
    TargetOutOfRange { id: u32, lo: u32, hi: u32 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("vocabulary fingerprint {actual} does not match model fingerprint {expected}")]
    FingerprintMismatch { expected: String, actual: String },

    #[error("scenario failed validation: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}
