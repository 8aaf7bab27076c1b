use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error(
        "drift assumption fails: a=({a1},{a2}), need a1<0 or a2<0; occupation measure may be infinite"
    )]
    DriftAssumption { a1: f64, a2: f64 },

    #[error("stationary system of A_** is singular (reducible background chain)")]
    ReducibleBackground,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("overflow while evaluating {0}")]
    Overflow(String),

    #[error("perron root of a zero matrix is undefined")]
    ZeroMatrix,

    #[error("{what} did not converge after {iterations} iterations ({detail})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        detail: String,
    },

    #[error("search bracket exceeded |theta| = {cap} in direction ({}, {}); Gamma appears unbounded", .d1 + 0.0, .d2 + 0.0)]
    Unbounded { cap: f64, d1: f64, d2: f64 },

    #[error("no two real solutions of chi(theta1, .) = 1 at theta1 = {theta1} (minimum {min_chi})")]
    NoTwoRoots { theta1: f64, min_chi: f64 },
}

impl Error {
    /// True for refusals caused by the input rather than by numerics.
    pub fn is_refusal(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Schema { .. }
                | Error::InvalidModel(_)
                | Error::DriftAssumption { .. }
                | Error::ReducibleBackground
                | Error::InvalidArgument(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
