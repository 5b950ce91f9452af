use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("case schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("load must be strictly positive (entry {index} is {value})")]
    NonPositiveLoad { index: usize, value: f64 },

    #[error("problem is infeasible")]
    Infeasible,

    #[error("problem is unbounded")]
    Unbounded,

    #[error("multiple optimal solutions suspected; perturb the cost vector to restore uniqueness")]
    MultipleOptima,

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("binding combination must satisfy |gens| + |branches| = n_gen - 1 (got {got}, need {need})")]
    ComboSize { got: usize, need: usize },

    #[error("binding combination is dependent (reduced system is singular)")]
    DependentSets,

    #[error("singular binding combination")]
    SingularCombo,

    #[error("parameter construction failed: {0}")]
    ConstructionFailed(String),

    #[error("load sits on a region boundary: binding set changes within the difference step")]
    RegionBoundary,

    #[error("point is not optimal for the conic problem: {0}")]
    NotOptimal(String),

    #[error("self-dual derivative system is singular (condition estimate {cond:.3e})")]
    SingularSystem { cond: f64 },

    #[error("combination budget exceeded: {candidates} candidates, cap {cap}")]
    BudgetExceeded { candidates: u128, cap: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Schema {
            path: String::new(),
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
