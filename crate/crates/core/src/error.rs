//! Error type shared by every module in the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while parsing, coding, embedding or
/// extracting.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A file format field failed to parse; names the offending field.
    #[error("invalid {field}: {detail}")]
    Parse {
        field: &'static str,
        detail: String,
    },

    /// Input ended before the expected amount of data was consumed.
    #[error("truncated input: expected {expected} {unit}, got {got}")]
    Truncated {
        expected: usize,
        got: usize,
        unit: &'static str,
    },

    /// Matrix or image dimensions are inconsistent with the operation.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// The host image cannot hold the requested payload.
    #[error("capacity error: sub-band holds {available} coefficients, payload needs {required}")]
    Capacity { available: usize, required: usize },

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// Two sequences that must match in length do not.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// A coded stream is internally inconsistent and cannot be decoded.
    #[error("corrupt stream: {0}")]
    Corrupt(String),

    /// A codeword's length does not match the code spec.
    #[error("framing error: {0}")]
    Framing(String),

    /// The gain system is numerically rank-deficient for this key/host
    /// combination; choosing a different key resolves it.
    #[error("degenerate key: gain system is numerically singular, try a different watermark key")]
    DegenerateKey,
}
