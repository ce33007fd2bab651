//! Diagnostics that are reported as data rather than raised as errors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::stage::SubProcess;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

/// Machine-readable code of a [`Finding`], carrying the subject it refers to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code", content = "subject", rename_all = "snake_case")]
pub enum FindingCode {
    /// An economic flow is consumed (or demanded) but no process produces it.
    MissingProducer(String),
    /// Several processes produce the same economic flow.
    MultipleProducers(String),
    /// A process produces more than one economic flow and has not been partitioned.
    MultifunctionalProcess(String),
    /// A process has only inputs and therefore cannot be scaled.
    ProcessWithoutProduct(String),
    NonSquareSystem {
        economic_flows: usize,
        processes: usize,
    },
    IllConditioned {
        estimate: f64,
    },
    /// Inventory flow without any characterization factor.
    UnknownFlow(String),
    /// A device declared no end-of-life exchanges; a zero-exchange process was emitted.
    EndOfLifeDataGap(String),
    /// A key that the file schema does not know (lenient mode only).
    UnknownSchemaKey(String),
    MissingMandatory(SubProcess),
    MissingRecommended(SubProcess),
    /// The default illustrative characterization table was used.
    IllustrativeFactors,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: FindingCode,
    pub message: String,
}

impl Finding {
    pub fn new(severity: Severity, code: FindingCode, message: impl Into<String>) -> Self {
        Finding {
            severity,
            code,
            message: message.into(),
        }
    }

    pub fn error(code: FindingCode, message: impl Into<String>) -> Self {
        Self::new(Severity::Error, code, message)
    }

    pub fn warning(code: FindingCode, message: impl Into<String>) -> Self {
        Self::new(Severity::Warning, code, message)
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.severity, self.message)
    }
}
