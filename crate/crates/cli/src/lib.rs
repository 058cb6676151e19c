//! Manifest parsing, pipelines and reports behind the `bmsymp` binary.

pub mod manifest;
pub mod pipelines;
pub mod report;

use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Pipeline(bmsymp::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Pipeline(e) => write!(f, "{e}"),
        }
    }
}

impl From<bmsymp::Error> for CliError {
    fn from(e: bmsymp::Error) -> Self {
        use bmsymp::Error as E;
        match e {
            E::Syntax { .. } | E::UnknownCoordinate(_) | E::NonIntegerExponent(_) | E::Chart(_) | E::InvalidInput(_) | E::Marking(_) => {
                CliError::Input(e.to_string())
            }
            other => CliError::Pipeline(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Pipeline(_) => 1,
        }
    }
}

/// Settings shared by all pipelines.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    pub tolerance: Option<f64>,
    pub grid: Option<usize>,
    pub taylor_order: Option<i64>,
    pub seed: u64,
}

/// Load a manifest and run its `[run]` command.
pub fn run_manifest(path: &Path, settings: &Settings) -> Result<report::Report, CliError> {
    let m = manifest::load(path)?;
    pipelines::dispatch(&m, &m.run, settings)
}
