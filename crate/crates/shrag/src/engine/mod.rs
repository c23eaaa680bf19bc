//! Embedded Boolean retrieval engine: tokenizer, inverted index, query
//! parser/evaluator, BM25 top-k, and the backend interface that lets a
//! remote HTTP engine stand in for the local one.

pub mod backend;
pub mod index;
pub mod query;
pub mod tokenize;

pub use backend::{LocalBackend, RemoteBackend, SearchBackend};
pub use index::{build_index, evaluate_boolean, search_topk, InvertedIndex, ScoredDocument};
pub use query::{parse_query, QueryAst};
pub use tokenize::tokenize;
