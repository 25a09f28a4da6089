use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid factor `{name}`: {reason}")]
    InvalidFactor { name: String, reason: String },

    #[error("unknown factor `{0}`")]
    UnknownFactor(String),

    #[error("unknown level `{level}` for factor `{factor}`")]
    UnknownLevel { factor: String, level: String },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("table is unbalanced: missing [{}], duplicated [{}]", .missing.join("; "), .duplicated.join("; "))]
    Unbalanced { missing: Vec<String>, duplicated: Vec<String> },

    #[error("level index {index} out of range for factor `{factor}` ({levels} levels)")]
    OutOfRangeLevel { factor: String, index: usize, levels: usize },

    #[error("generators are not independent: {0}")]
    DependentGenerators(String),

    #[error("factor `{0}` does not have exactly two levels")]
    NonTwoLevelFactor(String),

    #[error("invalid generator word `{word}`: {reason}")]
    InvalidWord { word: String, reason: String },

    #[error("defining relation has no non-identity word")]
    TrivialRelation,

    #[error("control and noise designs share factors: {}", .0.join(", "))]
    OverlappingFactors(Vec<String>),

    #[error("invalid interaction order {0}")]
    InvalidOrder(usize),

    #[error("invalid degrees of freedom ({df1}, {df2})")]
    InvalidDf { df1: f64, df2: f64 },

    #[error("control factor set is empty")]
    EmptyControlSet,

    #[error("infeasible heredity parameters: {0}")]
    InfeasibleParams(String),

    #[error("invalid correlation {0}: must lie in [0, 1)")]
    InvalidCorrelation(f64),

    #[error("Cholesky factorization failed: {0}")]
    CholeskyFailure(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("simulation failed at run {run} replicate {replicate} (seed {seed:#018x}, {levels}): {message}")]
    SimulationFailure { run: usize, replicate: u32, seed: u64, levels: String, message: String },

    #[error("unknown simulation `{0}`")]
    UnknownSimulation(String),

    #[error("pilot subset is empty")]
    EmptySubset,

    #[error("plot data does not match plot kind: {0}")]
    ArityMismatch(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SimulationFailure { .. } => 3,
            Error::Io(_) => 4,
            Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 4,
            _ => 2,
        }
    }
}
