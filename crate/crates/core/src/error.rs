use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sslang::{MarkerKind, ParseError};

/// A compile failure, optionally pinned to the cell that caused it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct CompileError {
    pub kind: CompileErrorKind,
    /// Sheet-qualified address, e.g. "Sheet1!A13".
    pub cell: Option<String>,
}

impl CompileError {
    pub fn new(kind: CompileErrorKind) -> Self {
        CompileError { kind, cell: None }
    }

    pub fn at(kind: CompileErrorKind, cell: impl Into<String>) -> Self {
        CompileError { kind, cell: Some(cell.into()) }
    }

    pub fn code(&self) -> &'static str {
        self.kind.code()
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic {
            code: self.code().to_string(),
            message: self.kind.to_string(),
            cell: self.cell.clone(),
        }
    }
}

impl fmt::Display for CompileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.cell {
            Some(cell) => write!(f, "{cell}: {}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileErrorKind {
    #[error("no ssVarRanges(...) declaration found in the workbook")]
    MissingVarRanges,
    #[error("no ssConstraintRanges(...) declaration found in the workbook")]
    MissingConstraintRanges,
    #[error("more than one {0} declaration")]
    DuplicateMarker(MarkerKind),
    #[error("{0}")]
    Parse(ParseError),
    #[error("variable {0} has no domain; give the cell a domain literal or cover it with ssDomain")]
    UnboundedVariable(String),
    #[error("at most one ssMin/ssMax objective is allowed")]
    MultipleObjectives,
    #[error("paired ranges have different sizes ({left} vs {right})")]
    PairLengthMismatch { left: usize, right: usize },
    #[error("the objective must be a single declared variable cell")]
    ObjectiveNotSingleCell,
    #[error("cell {0} is not a variable and does not hold an integer")]
    NonIntegerConstantCell(String),
    #[error("cell {0} is not a variable and is empty")]
    UnknownCell(String),
    #[error("ssDomain can only restrict variable cells, {0} is not one")]
    NotAVariable(String),
}

impl CompileErrorKind {
    pub fn code(&self) -> &'static str {
        match self {
            CompileErrorKind::MissingVarRanges => "MISSING_VAR_RANGES",
            CompileErrorKind::MissingConstraintRanges => "MISSING_CONSTRAINT_RANGES",
            CompileErrorKind::DuplicateMarker(_) => "DUPLICATE_MARKER",
            CompileErrorKind::Parse(_) => "PARSE_ERROR",
            CompileErrorKind::UnboundedVariable(_) => "UNBOUNDED_VARIABLE",
            CompileErrorKind::MultipleObjectives => "MULTIPLE_OBJECTIVES",
            CompileErrorKind::PairLengthMismatch { .. } => "PAIR_LENGTH_MISMATCH",
            CompileErrorKind::ObjectiveNotSingleCell => "OBJECTIVE_NOT_SINGLE_CELL",
            CompileErrorKind::NonIntegerConstantCell(_) => "NON_INTEGER_CONSTANT_CELL",
            CompileErrorKind::UnknownCell(_) => "UNKNOWN_CELL",
            CompileErrorKind::NotAVariable(_) => "NOT_A_VARIABLE",
        }
    }
}

/// Serializable `{code, message, cell}` record used by the CLI and service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cell: Option<String>,
}

impl Diagnostic {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Diagnostic { code: code.to_string(), message: message.into(), cell: None }
    }
}
