//! Execution: exact outcome trees, seeded sampling, mode comparison, audit
//! runs and their reports.

pub mod compare;
pub mod engine;
pub mod report;
pub mod sampling;
pub mod tree;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::protocol::{builtin, parse, Protocol};

pub use compare::{compare_modes, CompareRow, CompareTable};
pub use engine::{parse_record, record_map, Engine, Semantics, Trace};
pub use sampling::{run_sampled, FrequencyRow, FrequencyTable};
pub use tree::{run_exact, OutcomeTree, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    ExactCollapse,
    ExactExternal,
    Sample,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "exact-collapse" => Ok(Mode::ExactCollapse),
            "exact-external" => Ok(Mode::ExactExternal),
            "sample" => Ok(Mode::Sample),
            _ => Err(format!("unknown mode `{s}` (exact-collapse, exact-external, sample)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::ExactCollapse => "exact-collapse",
            Mode::ExactExternal => "exact-external",
            Mode::Sample => "sample",
        })
    }
}

/// A protocol file or a `builtin:<name>` reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolSource {
    Builtin(String),
    Path(PathBuf),
}

impl FromStr for ProtocolSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.strip_prefix("builtin:") {
            Some(name) => ProtocolSource::Builtin(name.to_string()),
            None => ProtocolSource::Path(PathBuf::from(s)),
        })
    }
}

impl fmt::Display for ProtocolSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolSource::Builtin(n) => write!(f, "builtin:{n}"),
            ProtocolSource::Path(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Parse(#[from] crate::protocol::ParseError),
}

impl ProtocolSource {
    pub fn load(&self) -> std::result::Result<Protocol, LoadError> {
        match self {
            ProtocolSource::Builtin(name) => builtin(name).ok_or_else(|| LoadError::UnknownBuiltin(name.clone())),
            ProtocolSource::Path(path) => {
                let bytes = std::fs::read(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
                Ok(parse(&bytes)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Table,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "table" => Ok(OutputFormat::Table),
            _ => Err(format!("unknown format `{s}` (json, table)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub protocol: ProtocolSource,
    pub mode: Mode,
    pub trials: Option<u64>,
    pub seed: u64,
    pub external_agents: Option<Vec<String>>,
    pub format: OutputFormat,
}

impl RunConfig {
    /// Trials are required for sampling and meaningless otherwise.
    pub fn check(&self) -> Result<()> {
        match (self.mode, self.trials) {
            (Mode::Sample, None) => Err(Error::Invalid("--trials is required in sample mode".into())),
            (Mode::Sample, Some(0)) => Err(Error::Invalid("--trials must be positive".into())),
            (Mode::ExactCollapse | Mode::ExactExternal, Some(_)) => {
                Err(Error::Invalid("--trials only applies to sample mode".into()))
            }
            _ => Ok(()),
        }
    }
}
