//! Preprocessing of raw log lines and tamper-evident storage of the result.

mod chain;
mod schema;

pub use chain::{verify_bytes, verify_chain, ChainStore, ChainedEntry, Digest, VerificationReport, ZERO_DIGEST};
pub use schema::{
    compile_schema, preprocess, preprocess_lines, recommended_masks, HeaderSchema, LogRecord,
    MaskRule, Preprocessed, UnparsablePolicy, CONTENT_FIELD,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed format template: {0}")]
    MalformedFormat(String),
    #[error("invalid mask pattern `{pattern}`: {source}")]
    BadMask {
        pattern: String,
        #[source]
        source: regex::Error,
    },
    #[error("line {line_id} does not match the header format")]
    UnparsableLine { line_id: u64 },
    #[error("line {line_id} has no content tokens")]
    EmptyContent { line_id: u64 },
    #[error("append to chain store failed: {0}")]
    AppendFailed(#[source] std::io::Error),
    #[error("chain store is corrupt at entry {index}")]
    CorruptChain { index: u64 },
    #[error("chain store payload is larger than an entry can hold")]
    PayloadTooLarge,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
