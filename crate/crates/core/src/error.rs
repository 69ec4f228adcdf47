use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Problems with a model document: either it does not parse, or the network
/// it describes breaks an invariant. Validation errors name the variable.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed model document: {0}")]
    Parse(String),
    #[error("variable `{0}` is declared more than once")]
    DuplicateVariable(String),
    #[error("variable `{variable}` has duplicate state `{state}`")]
    DuplicateState { variable: String, state: String },
    #[error("variable `{0}` needs at least two states")]
    TooFewStates(String),
    #[error("variable `{variable}` references unknown parent `{parent}`")]
    DanglingParent { variable: String, parent: String },
    #[error("variable `{variable}` lists parent `{parent}` twice")]
    RepeatedParent { variable: String, parent: String },
    #[error("variables form a cycle through `{0}`")]
    Cycle(String),
    #[error("CPT of `{variable}` has {found} entries, expected {expected}")]
    CptLength {
        variable: String,
        expected: usize,
        found: usize,
    },
    #[error("CPT of `{variable}` has entry {value} outside [0, 1]")]
    CptRange { variable: String, value: f64 },
    #[error("CPT column {column} of `{variable}` sums to {sum}")]
    CptSum { variable: String, column: usize, sum: f64 },
    #[error("target `{0}` is not a variable of the network")]
    UnknownTarget(String),
    #[error("target state `{state}` is not a state of `{target}`")]
    UnknownTargetState { target: String, state: String },
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}` has no state `{state}`")]
    UnknownState { variable: String, state: String },
    #[error("prior override {0} must lie strictly between 0 and 1")]
    InvalidOverride(f64),
    /// The evidence has probability zero under the model.
    #[error("evidence is contradictory (probability zero under the model)")]
    Contradiction,
    /// The evidence has positive but sub-1e-300 probability.
    #[error("evidence probability {0:e} underflows double precision")]
    Underflow(f64),
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("malformed catalog document: {0}")]
    Parse(String),
    #[error("intervention `{0}` appears more than once")]
    Duplicate(String),
    #[error("catalog is missing intervention `{0}`")]
    Missing(String),
    #[error("intervention `{id}`: {reason}")]
    Invalid { id: String, reason: String },
    #[error("unknown intervention `{0}`")]
    Unknown(String),
}

#[derive(Debug, Error)]
pub enum InfoError {
    #[error("p(CRC) = {0} must lie strictly between 0 and 1")]
    DegeneratePrior(f64),
    #[error("screening result {0} has probability zero under this strategy")]
    UnreachableResult(String),
}

#[derive(Debug, Error)]
pub enum PreferenceError {
    #[error("pair has equal information ({0}); λ is undefined")]
    EqualInformation(f64),
    #[error("indifference cost {indifference} must be below the stated cost {stated}")]
    IndifferenceTooHigh { indifference: f64, stated: f64 },
    #[error("negative cost {0}")]
    NegativeCost(f64),
    #[error("no λ estimates to robustify")]
    NoEstimates,
    #[error("λ estimate {0} is not positive")]
    NonPositiveLambda(f64),
    #[error("comfort level {0} is outside 1..=4")]
    ComfortOutOfRange(u8),
    #[error("calibration failed: {0}")]
    Calibration(String),
    /// The PE point sits on the risk-neutral line: ρ → 0.
    #[error("PE value {pe} is consistent with risk neutrality (linear PE {linear}); ρ → 0")]
    RiskNeutralLimit { pe: f64, linear: f64 },
    #[error("malformed transcript: {0}")]
    Transcript(String),
}

#[derive(Debug, Error)]
pub enum PopulationError {
    #[error("population size must be at least 1")]
    EmptyPopulation,
    #[error("population file: {0}")]
    Csv(String),
    #[error("population row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("variable `{0}` is required but absent from the model")]
    MissingVariable(String),
    #[error("sweep grid is empty")]
    EmptyGrid,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}
