//! Exit codes: 0 success, 1 validation, 2 runtime divergence, 3 I/O.

use delaynet::Error;

pub const VALIDATION: u8 = 1;
pub const DIVERGENCE: u8 = 2;
pub const IO: u8 = 3;

/// A rejected argument or config, reported with exit code 1.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

/// Training stopped on a non-finite value; exit code 2.
#[derive(Debug)]
pub struct Diverged(pub String);

impl std::fmt::Display for Diverged {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "training diverged: {}", self.0)
    }
}

impl std::error::Error for Diverged {}

pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub fn classify(err: &anyhow::Error) -> Failure {
    let message = format!("{err:#}");
    let mut code = IO;
    for cause in err.chain() {
        if cause.is::<Invalid>() {
            code = VALIDATION;
            break;
        }
        if cause.is::<Diverged>() {
            code = DIVERGENCE;
            break;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            code = match e {
                Error::InvalidArgument(_) => VALIDATION,
                Error::Divergence { .. } | Error::NonConvergence { .. } => DIVERGENCE,
                Error::Format { .. } | Error::Io { .. } => IO,
            };
            break;
        }
        if cause.is::<std::io::Error>() {
            break;
        }
    }
    Failure { code, message }
}

/// Loads a config, reporting parse and validation problems as code 1.
pub fn load_config(path: &std::path::Path) -> anyhow::Result<delaynet::experiment::ExperimentConfig> {
    match delaynet::experiment::ExperimentConfig::load(path) {
        Ok(c) => Ok(c),
        Err(e @ Error::Io { .. }) => Err(e.into()),
        Err(e) => Err(Invalid(e.to_string()).into()),
    }
}
