use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Malformed input record. `context` carries the file and row/feature.
    #[error("schema error in {context}: {message}")]
    Schema { context: String, message: String },

    #[error("value out of range for tract {tract_id}: {field} = {value}")]
    Range {
        tract_id: String,
        field: String,
        value: f64,
    },

    #[error("snap error: {0}")]
    Snap(String),

    #[error("variable table is empty: every tract was dropped")]
    EmptyTable,

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("constant column: {0} has zero variance")]
    ConstantColumn(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn schema(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            context: context.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2 ingest, 3 numerical precondition, 4 configuration, 5 output I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema { .. }
            | Error::Range { .. }
            | Error::DegenerateGeometry(_)
            | Error::Snap(_)
            | Error::EmptyTable
            | Error::MissingInput(_)
            | Error::Read { .. } => 2,
            Error::Domain(_) | Error::ConstantColumn(_) | Error::Numerical(_) => 3,
            Error::Config(_) => 4,
            Error::Write { .. } => 5,
        }
    }
}
