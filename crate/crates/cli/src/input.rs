//! File loading with the error classification used for exit codes.

use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::Path;
use std::process::ExitCode;
use tempus::io::{AnyClock, RawClock};
use tempus::{QuantumClock, TempusError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Domain(#[from] TempusError),
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    message: String,
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Parse(_) => "parse",
            CliError::Domain(_) => "domain",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            _ => 2,
        }
    }

    /// Prints the error as one JSON line on stderr.
    pub fn report(&self) -> ExitCode {
        let message = self.to_string().lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" ");
        let line = ErrorLine { error: self.kind(), message };
        eprintln!("{}", serde_json::to_string(&line).expect("strings serialize"));
        ExitCode::from(self.exit_code())
    }
}

pub fn parse<R: DeserializeOwned>(path: &Path) -> Result<R, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Parses the raw form `R` (syntax errors exit 2), then validates into `T`
/// (invariant violations exit 1).
pub fn load<R: DeserializeOwned, T: TryFrom<R, Error = TempusError>>(path: &Path) -> Result<T, CliError> {
    Ok(T::try_from(parse::<R>(path)?)?)
}

pub fn load_clock(path: &Path) -> Result<AnyClock, CliError> {
    Ok(match parse::<RawClock>(path)? {
        RawClock::Quantum(raw) => AnyClock::Quantum(raw.try_into()?),
        RawClock::Classical(raw) => AnyClock::Classical(raw.try_into()?),
    })
}

pub fn load_quantum(path: &Path) -> Result<QuantumClock, CliError> {
    match load_clock(path)? {
        AnyClock::Quantum(c) => Ok(c),
        AnyClock::Classical(_) => {
            Err(TempusError::InvalidArgument(format!("{} holds a classical clock; a quantum clock is needed", path.display())).into())
        }
    }
}
