use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {msg}")]
    Param { name: &'static str, msg: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{what}: no convergence after {iterations} iterations (last residual {residual:.3e})")]
    IterationLimit {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("bracketing failed: {0}")]
    Bracketing(String),

    #[error("integration failed at r = {r:.6e}: {msg}")]
    Integration { r: f64, msg: String },

    #[error("frequency below threshold: omega = {omega} does not exceed -mu1 ({msg})")]
    BelowThreshold { omega: f64, msg: String },

    #[error("mass a = {a} is not below the critical mass a* = {a_star}: no minimizer exists")]
    SupercriticalMass { a: f64, a_star: f64 },

    #[error("energy is unbounded below on the mass sphere for alpha = {alpha} > 4/d = {critical}")]
    UnboundedBelow { alpha: f64, critical: f64 },

    #[error("{what} stagnated: {detail}")]
    Convergence { what: &'static str, detail: String },

    #[error("under-resolved: {0}")]
    Resolution(String),

    #[error("threshold not found: {0}")]
    NotFound(String),

    #[error("profile parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, msg: impl Into<String>) -> Error {
    Error::Param {
        name,
        msg: msg.into(),
    }
}
