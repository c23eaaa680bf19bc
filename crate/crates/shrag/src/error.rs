//! Crate-wide error type.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid json in {context}: {message}")]
    Json { context: String, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("query parse error at byte {offset}: {message}")]
    QueryParse { offset: usize, message: String },

    #[error("cannot serialize query term {term:?}: {message}")]
    QuerySerialize { term: String, message: String },

    #[error("no keywords extracted")]
    NoKeywords,

    #[error("and_count {and_count} out of range for {keyword_count} keywords")]
    AndCountOutOfRange {
        and_count: usize,
        keyword_count: usize,
    },

    #[error("provider {provider} failed: {message}")]
    Provider { provider: String, message: String },

    #[error("backend error for query {query:?}: {message}")]
    Backend {
        query: String,
        message: String,
        retriable: bool,
    },

    #[error("collection failed for ladder levels {failed_levels:?}: {message}")]
    PartialCollection {
        failed_levels: Vec<usize>,
        message: String,
    },

    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("zero vector rejected: {0}")]
    ZeroVector(String),

    #[error("empty text cannot be embedded")]
    EmptyEmbedText,

    #[error("rerank failed on document {doc_id}: {message}")]
    Rerank { doc_id: String, message: String },

    #[error("template error: {0}")]
    Template(String),

    #[error("prompt budget {budget} too small: {needed} chars needed with empty documents")]
    PromptBudget { budget: usize, needed: usize },

    #[error("answer parse error: missing or empty section {section}")]
    AnswerParse { section: String },

    #[error("empty document set")]
    EmptyDocumentSet,

    #[error("no queries")]
    NoQueries,

    #[error("invalid usage: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that a retry against the same input may resolve.
    pub fn is_retriable(&self) -> bool {
        matches!(self, Error::Backend { retriable: true, .. })
    }
}
