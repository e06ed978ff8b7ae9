//! Exit statuses and the `key value` run report.

use std::fmt::{self, Display};
use std::path::Path;

use widthred::Error;

pub const EXIT_PASS: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_CAP: u8 = 3;

/// A failed command: the exit status and a one-line reason.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INVALID, message: message.into() }
    }

    pub fn io(path: &Path, err: impl Display) -> Self {
        Failure::usage(format!("{}: {err}", path.display()))
    }
}

impl Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::CapExceeded { .. } | Error::ScopeTooLarge { .. } => EXIT_CAP,
            Error::Parse { .. } => EXIT_USAGE,
            _ => EXIT_INVALID,
        };
        Failure { code, message: err.to_string() }
    }
}

/// Ordered `key value` lines; values are single-line.
#[derive(Debug, Default)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn put(&mut self, key: &str, value: impl Display) {
        let value = value.to_string().replace('\n', " ");
        self.lines.push((key.to_string(), value));
    }

    pub fn render(&self) -> String {
        self.lines.iter().map(|(k, v)| format!("{k} {v}\n")).collect()
    }
}

pub type Outcome = Result<(), Failure>;
