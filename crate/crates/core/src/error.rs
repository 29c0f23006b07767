use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("size mismatch: {what} ({expected} vs {found})")]
    Size {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("{what} {value} out of range [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("degenerate vertical flow at pixel ({x}, {y}): |h + f_v| = {denom} < 1")]
    DegenerateFlow { x: usize, y: usize, denom: f64 },

    #[error("singular retiming at row {row}: |t1 - tau| = {gap} < {epsilon}")]
    SingularRetime { row: usize, gap: f64, epsilon: f64 },

    #[error("non-finite flow at pixel ({x}, {y})")]
    InvalidFlow { x: usize, y: usize },

    #[error("scanline solver did not converge at pixel ({x}, {y}) after {iterations} iterations")]
    Solver {
        x: usize,
        y: usize,
        iterations: usize,
    },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("{path}: format error: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}:{line}: field `{field}`: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        field: String,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn size(what: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Size {
            what,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
