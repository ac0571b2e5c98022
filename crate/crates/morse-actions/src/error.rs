use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter point {point:?} lies outside the parameter box")]
    ParamOutOfBox { point: Vec<f64> },

    #[error("parameter point has dimension {got}, expected {expected}")]
    ParamDimension { expected: usize, got: usize },

    #[error("width {width} exceeds the analyticity width {s0}")]
    WidthExceedsAnalyticity { width: f64, s0: f64 },

    #[error("critical point at theta = {theta} is degenerate (|F''| = {second})")]
    DegenerateCriticalPoint { theta: f64, second: f64 },

    #[error("critical values {first} and {second} coincide within tolerance")]
    NonDistinctCriticalValues { first: f64, second: f64 },

    #[error("potential has no critical points")]
    NoCriticalPoints,

    #[error("continuation of critical point {index} diverged")]
    ContinuationDiverged { index: usize },

    #[error("unmatched critical point at theta = {theta}")]
    ExtraCriticalPoint { theta: f64 },

    #[error("energy {energy} outside the open interval of branch {branch}")]
    EnergyOutOfBranch { branch: usize, energy: f64 },

    #[error("energy {energy} implied by y = {y} leaves the window of branch {branch}")]
    TooCloseToSeparatrix { branch: usize, y: f64, energy: f64 },

    #[error("contraction failed: {context}")]
    ContractionFailed { context: String },

    #[error("bound violated: {which} (value {value}, bound {bound})")]
    BoundViolated { which: String, value: f64, bound: f64 },

    #[error("1 + b is not positive ({value})")]
    NegativeRadicand { value: f64 },

    #[error("R0 = {r0_big} is smaller than 2 sqrt(M) = {required}")]
    R0TooSmall { r0_big: f64, required: f64 },

    #[error("energy {energy} outside window ({lower}, {upper}) of region {region}")]
    EnergyOutOfWindow { region: usize, energy: f64, lower: f64, upper: f64 },

    #[error("region {region} does not exist (2N = {max})")]
    NoSuchRegion { region: usize, max: usize },

    #[error("energy {energy} does not clear the interior maximum {maximum} of region {region}")]
    InteriorTurningPoint { region: usize, energy: f64, maximum: f64 },

    #[error("quadrature did not converge after {doublings} doublings")]
    QuadratureStalled { doublings: usize },

    #[error("only {usable} usable fit points (need at least 6)")]
    WindowTooSmall { usable: usize },

    #[error("fit normal equations are ill-conditioned (condition {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("bottom of well {well} fails the analyticity check (residual {residual:e})")]
    AnalyticityViolated { well: usize, residual: f64 },

    #[error("action {action} outside the domain ({lower}, {upper})")]
    ActionOutOfDomain { action: f64, lower: f64, upper: f64 },

    #[error("root solver stalled near {at}")]
    NewtonStalled { at: f64 },

    #[error("energy {energy} outside the admissible range for region {region}")]
    EnergyOutOfRange { region: usize, energy: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("schema error in field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures that signal a violated analytic bound rather than bad input.
    pub fn is_bound_failure(&self) -> bool {
        matches!(
            self,
            Error::BoundViolated { .. } | Error::AnalyticityViolated { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
