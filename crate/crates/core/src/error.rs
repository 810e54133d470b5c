use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error in {op}: {lhs:?} vs {rhs:?}")]
    Shape { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("backward already ran on this graph; reset it before calling again")]
    BackwardTwice,

    #[error("parameter key sets differ: {0}")]
    KeyMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("unknown task {0:?}")]
    UnknownTask(String),

    #[error("unknown variant {0:?}")]
    UnknownVariant(String),

    #[error("input is not binary-valued")]
    NonBinary,

    #[error("trace is not terminated")]
    NotTerminated,

    #[error("demonstration force statistics are empty")]
    EmptyStats,

    #[error("format mismatch: expected magic {expected:?}, found {found:?}")]
    FormatMismatch { expected: String, found: String },

    #[error("corrupt container: {0}")]
    CorruptContainer(String),

    #[error("duplicate record name {0:?}")]
    DuplicateName(String),

    #[error("missing record {0:?}")]
    MissingRecord(String),

    #[error("metrics header mismatch in {0}")]
    HeaderMismatch(PathBuf),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("variant mismatch: checkpoint holds {checkpoint}, requested {requested}")]
    VariantMismatch { checkpoint: String, requested: String },

    #[error("dataset mismatch: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Error {
    Error::Shape { op, lhs: lhs.to_vec(), rhs: rhs.to_vec() }
}
