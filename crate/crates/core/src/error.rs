use thiserror::Error;

/// Errors raised by the reductions, decomposition machinery and oracles.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),

    #[error("unknown vertex {0}")]
    UnknownVertex(usize),

    #[error("schedule step {step} ({rule}): {reason}")]
    ScheduleRule {
        step: usize,
        rule: &'static str,
        reason: String,
    },

    #[error("schedule step {step}: realized degree {realized} exceeds claimed {claimed}")]
    DegreeOverflow {
        step: usize,
        realized: usize,
        claimed: usize,
    },

    #[error("no bag of the tail decomposition contains the neighborhood of vertex {0}")]
    AttachmentNotFound(usize),

    #[error("constraint scope of {scope} variables exceeds cap {cap}")]
    ScopeTooLarge { scope: usize, cap: usize },

    #[error("gadget: {0}")]
    Gadget(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("k-expression: {0}")]
    Expression(String),

    #[error("machine: {0}")]
    Machine(String),

    #[error("resource cap exceeded: {what} = {value} > {cap}")]
    CapExceeded {
        what: &'static str,
        value: usize,
        cap: usize,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
