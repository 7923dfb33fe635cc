use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which ratio could not be formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Undefined {
    /// Antecedent never occurs.
    Confidence,
    /// Antecedent or consequent never occurs.
    Lift,
}

impl fmt::Display for Undefined {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Undefined::Confidence => f.write_str("confidence undefined (antecedent count is zero)"),
            Undefined::Lift => f.write_str("lift undefined (antecedent or consequent count is zero)"),
        }
    }
}

/// Pipeline stage an error originated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Cluster,
    Mine,
    Extend,
    Evaluate,
    Synth,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Cluster => "cluster",
            Stage::Mine => "mine",
            Stage::Extend => "extend",
            Stage::Evaluate => "evaluate",
            Stage::Synth => "synth",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing artifact {} (run the preceding stage first)", .0.display())]
    MissingArtifact(PathBuf),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("column `{0}` is not declared in the schema")]
    UnknownColumn(String),

    #[error("duplicate record for cell `{cell}` at timestamp {timestamp}")]
    DuplicateRecord { cell: String, timestamp: i64 },

    #[error("cell `{cell}`: timestamp {timestamp} does not follow {previous}")]
    NonMonotoneTimestamp { cell: String, previous: i64, timestamp: i64 },

    #[error("cell `{cell}`: timestamp {timestamp} is off the {interval}s sampling grid")]
    OffGrid { cell: String, timestamp: i64, interval: i64 },

    #[error("cannot parse `{value}` in column `{column}`")]
    Unparseable { column: String, value: String },

    #[error("no quantization scheme for `{0}`")]
    MissingScheme(String),

    #[error("NaN value in `{0}`")]
    NanValue(String),

    #[error("`{variable}` has {distinct} distinct values, need at least {needed}")]
    TooFewDistinct { variable: String, distinct: usize, needed: usize },

    #[error("continuous CP `{0}` needs an explicit breakpoint scheme")]
    ContinuousWithoutScheme(String),

    #[error("`{0}` has unordered (categorical) levels")]
    UnorderedLevels(String),

    #[error("invalid quantization for `{variable}`: {msg}")]
    InvalidScheme { variable: String, msg: String },

    #[error("feature `{feature}` has no observations for cells: {}", cells.join(", "))]
    MissingFeature { feature: String, cells: Vec<String> },

    #[error("cut requests {requested} clusters but only {cells} cells exist")]
    CutTooLarge { requested: usize, cells: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unknown cluster {0}")]
    UnknownCluster(usize),

    #[error("transaction has two levels of `{0}`")]
    LevelConflict(String),

    #[error("{0}")]
    UndefinedMetric(Undefined),

    #[error("variable `{0}` does not occur in the item dictionary")]
    VariableAbsent(String),

    #[error("{identity} identity violated: aggregate {aggregate} vs level sum {decomposed}")]
    IdentityViolation { identity: &'static str, aggregate: f64, decomposed: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("environment item `{0}` collides with a rule variable")]
    EnvCollision(String),

    #[error("dataset has no PM variables")]
    NoPmVariables,

    #[error("precision undefined: no mined rule is covered by the label set")]
    PrecisionUndefined,

    #[error("k = {k} exceeds the {len} available rules")]
    KOutOfRange { k: usize, len: usize },

    #[error("unsatisfiable synthetic spec: {0}")]
    Unsatisfiable(String),

    #[error("[{stage}] {source}")]
    Stage { stage: Stage, source: Box<Error> },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn in_stage(self, stage: Stage) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }

    /// Process exit code: 1 configuration, 2 data, 3 internal assertion.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Config(_) | Error::CutTooLarge { .. } => 1,
            Error::IdentityViolation { .. } => 3,
            _ => 2,
        }
    }
}
