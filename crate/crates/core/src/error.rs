use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("negative input `{name}` = {value}")]
    NegativeInput { name: &'static str, value: f64 },

    #[error("deceased agents have no controls or running cost")]
    DeceasedControl,

    #[error("invalid parameter `{field}` for group `{group}`: {reason}")]
    InvalidParameter {
        group: String,
        field: &'static str,
        reason: String,
    },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("{sweep} sweep blew up at node {node}, group {group} (|value| = {value})")]
    BlowUp {
        sweep: &'static str,
        node: usize,
        group: usize,
        value: f64,
    },

    #[error("series are defined on different grids ({left} vs {right} nodes)")]
    GridMismatch { left: usize, right: usize },

    #[error("unknown group `{0}`")]
    UnknownGroup(String),

    #[error("unknown scenario `{name}`; available: {}", available.join(", "))]
    UnknownScenario {
        name: String,
        available: Vec<String>,
    },

    #[error("{0}")]
    Parse(String),

    #[error("{}validation error at `{key}`: {reason}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Validation {
        key: String,
        reason: String,
        line: Option<usize>,
    },

    #[error("invalid simulation request: {0}")]
    InvalidSimulation(String),

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn param(group: &str, field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            group: group.to_string(),
            field,
            reason: reason.into(),
        }
    }
}
