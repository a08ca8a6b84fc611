use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or lengths do not match what an operation requires.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Kernel id outside the bank (valid ids are 1..=8).
    #[error("unknown blur kernel id {0} (expected 1..=8)")]
    UnknownKernel(u8),

    /// Malformed or truncated PGM data.
    #[error("format error: {0}")]
    Format(String),

    /// Dense materialization refused: the operator is too large.
    #[error("size cap exceeded: {in_len} x {out_len} entries (cap {cap})")]
    SizeCap {
        in_len: usize,
        out_len: usize,
        cap: usize,
    },

    /// Noise injection on a constant image: SNR is undefined.
    #[error("degenerate signal: image variance is zero, finite SNR is undefined")]
    DegenerateSignal,

    /// A TV variant that the MM solver has no majorizer for.
    #[error("unsupported TV variant for this operation: {0}")]
    UnsupportedVariant(&'static str),

    /// Non-finite values or solver breakdown.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An operation that needs at least one observation got none.
    #[error("empty observation set")]
    EmptyObservation,

    /// Scalar argument outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Config text that does not parse.
    #[error("config syntax error at line {line}: {msg}")]
    ConfigSyntax { line: usize, msg: String },

    /// Config value that parses but fails validation.
    #[error("config value error for key `{key}`: {msg}")]
    ConfigValue { key: String, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
