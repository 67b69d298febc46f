use std::fmt;

use forte_core::Error;

/// Why a command stopped, and the exit code that goes with it.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    /// The command ran but a requested threshold was not met.
    Threshold(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Threshold(_) => 3,
        }
    }

    pub fn usage(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Data(m) => write!(f, "data: {m}"),
            Failure::Threshold(m) => write!(f, "threshold not met: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_data_error() || matches!(e, Error::InsufficientSamples { .. } | Error::NotConverged { .. }) {
            Failure::Data(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

/// Collects threshold checks and fails once with all of them.
#[derive(Debug, Default)]
pub struct Gate(Vec<String>);

impl Gate {
    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.0.push(what());
        }
    }

    pub fn finish(self) -> Result<(), Failure> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(Failure::Threshold(self.0.join("; ")))
        }
    }
}
