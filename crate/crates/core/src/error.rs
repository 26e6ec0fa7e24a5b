use alloc::string::String;
use core::fmt;

/// Errors raised by the library operations.
///
/// Report-style validators (`validate_*`) never return these for content
/// problems; they list violations instead. Errors are reserved for calls whose
/// preconditions do not hold.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A label is not declared in the scenario or model.
    UnknownLabel(String),
    /// Two objects that must agree in size do not.
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// A scenario failed validation; the message lists the first violation.
    InvalidScenario(String),
    /// Enumerating global assignments would exceed the configured cap.
    AssignmentCapExceeded { count: u128, cap: u64 },
    /// An ordering is not a permutation of the context it applies to.
    NotAPermutation { context: usize },
    /// Mixing or generator weights are negative or do not sum to one.
    InvalidWeights(String),
    /// Behaviours that must share a scenario do not.
    ScenarioMismatch,
    /// An empty or repeated position selection was given to a marginal.
    InvalidSelection(String),
    /// An instrument is missing response/transfer data or a realization.
    MissingInstrument(String),
    /// The operation needs a two-outcome instrument.
    NotBinary(String),
    /// A builder parameter is inconsistent.
    InvalidParameter(String),
    /// The hidden variable space exceeds the dense-storage cap.
    LambdaCapExceeded { count: usize, cap: usize },
    /// A matrix that must be positive semidefinite is not.
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    /// Effects or Kraus operators do not resolve the identity.
    Incomplete { deviation: f64 },
    /// Matrix dimensions disagree.
    DimensionMismatch { expected: usize, found: usize },
    /// A matrix is not a valid density operator.
    InvalidState(String),
    /// A conditional quantity is undefined because its outcome has zero probability.
    ZeroProbability,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnknownLabel(l) => write!(f, "unknown instrument label `{l}`"),
            Error::ShapeMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected {expected}, found {found}"),
            Error::InvalidScenario(msg) => write!(f, "invalid scenario: {msg}"),
            Error::AssignmentCapExceeded { count, cap } => write!(
                f,
                "{count} global assignments exceed the enumeration cap of {cap}"
            ),
            Error::NotAPermutation { context } => {
                write!(f, "ordering for context {context} is not a permutation")
            }
            Error::InvalidWeights(msg) => write!(f, "invalid weights: {msg}"),
            Error::ScenarioMismatch => f.write_str("behaviours are defined on different scenarios"),
            Error::InvalidSelection(msg) => write!(f, "invalid position selection: {msg}"),
            Error::MissingInstrument(l) => write!(f, "no data for instrument `{l}`"),
            Error::NotBinary(l) => write!(f, "instrument `{l}` must have exactly two outcomes"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::LambdaCapExceeded { count, cap } => {
                write!(f, "{count} hidden variables exceed the cap of {cap}")
            }
            Error::NotPositiveSemidefinite { min_eigenvalue } => write!(
                f,
                "matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})"
            ),
            Error::Incomplete { deviation } => {
                write!(f, "operators do not sum to the identity (deviation {deviation:e})")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InvalidState(msg) => write!(f, "invalid density matrix: {msg}"),
            Error::ZeroProbability => f.write_str("outcome has zero probability"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
