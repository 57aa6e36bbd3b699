use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected width {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("both classes must be present ({0})")]
    SingleClass(&'static str),

    #[error("class {class} has {count} members, need at least {required}")]
    ClassTooSmall {
        class: u8,
        count: usize,
        required: usize,
    },

    #[error("column '{0}' has no observed values")]
    AllMissing(String),

    #[error("unknown category index {index} in column '{column}'")]
    UnknownCategory { column: String, index: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invariant violated: {0}")]
    Invariant(String),
}
