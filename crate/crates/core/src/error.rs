use thiserror::Error;

/// Best iterate returned alongside a convergence failure.
#[derive(Debug, Clone, PartialEq)]
pub struct BestIterate {
    pub weights: Vec<f64>,
    pub energy: f64,
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("size error: {what} needs {needed} points, budget is {budget}")]
    Size {
        what: &'static str,
        needed: u128,
        budget: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract error: {0}")]
    Contract(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("resolution error: scale r = {r} is below the resolution guard {guard}")]
    Resolution { r: f64, guard: f64 },

    #[error(
        "convergence error: duality gap {} after {} iterations{}",
        .best.gap,
        .best.iterations,
        .scale.map(|r| format!(" at scale r = {r}")).unwrap_or_default()
    )]
    Convergence { best: Box<BestIterate>, scale: Option<f64> },

    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
