use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A NaN or infinity showed up where a finite value was required.
    #[error("non-finite value in {what}{}", step_suffix(*.step))]
    NonFinite { what: &'static str, step: Option<usize> },

    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// An argument fell outside the domain an operation is defined on.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("unsupported snapshot format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(t) => format!(" at step {t}"),
        None => String::new(),
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &'static str, step: Option<usize>) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what, step })
    }
}

pub(crate) fn ensure_len(values: &[f64], expected: usize, what: &'static str) -> Result<()> {
    if values.len() == expected {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            found: values.len(),
        })
    }
}
