//! Retrieval pipeline that searches the way an expert human does: extract
//! bilingual keywords from the question, issue progressively narrower
//! OR-queries against a Boolean engine, dedup and filter the union of
//! hits, re-rank by multilingual embedding similarity, and generate a
//! structured (Title, Introduction, Main Body) answer over the top
//! documents — plus the evaluation harness (QSR, evidence coverage, and
//! the AND-operator sweep) used to study the query strategy.
//!
//! The crate is usable offline end to end: deterministic providers (the
//! TF-IDF keyword extractor, the token-hashing embedder, the template
//! generator) stand in for LLM and embedding services, and every remote
//! provider slots in behind the same traits.
//!
//! - [`document`] — corpus model, JSON-lines ingestion, dedup keys
//! - [`engine`] — tokenizer, inverted index, Boolean parser/evaluator,
//!   BM25 top-k, local/remote backends
//! - [`keywords`] — bilingual keyword extraction and importance ranking
//! - [`ladder`] — OR-ladder and AND-variant query generation
//! - [`rerank`] — cosine re-ranking over embedding providers
//! - [`answer`] — prompt assembly, generation providers, answer parsing
//! - [`pipeline`] — the five-stage orchestrator with per-stage traces
//! - [`eval`] — QSR, evidence coverage, the AND-count sweep
//! - [`cli`] — the index/ask/sweep/eval commands behind the binary

pub mod answer;
pub mod cli;
pub mod config;
pub mod document;
pub mod engine;
pub mod error;
pub mod eval;
pub mod keywords;
pub mod ladder;
pub mod parallel;
pub mod pipeline;
pub mod rerank;
pub mod seed;

pub use answer::{GenerationProvider, PromptTemplate, StructuredAnswer, TemplateGenerator};
pub use config::{Components, PipelineConfig};
pub use document::{dedup_key, ingest, is_complete, Corpus, CorpusFormat, Document, IngestReport};
pub use engine::{
    build_index, evaluate_boolean, parse_query, search_topk, InvertedIndex, LocalBackend,
    QueryAst, RemoteBackend, ScoredDocument, SearchBackend,
};
pub use error::{Error, Result};
pub use eval::{evidence_coverage, qsr, run_and_sweep, EvalQuery, SweepReport};
pub use keywords::{
    extract_bilingual, rank_and_truncate, split_compounds, ExtractorProvider, Keyword, KeywordSet,
    StatisticalExtractor,
};
pub use ladder::{generate_and_variant, generate_or_ladder, serialize, QueryLadder, SearchQuery};
pub use pipeline::{collect_documents, Pipeline, PipelineTrace, QueryRecord};
pub use rerank::{cosine, rerank_topk, EmbeddingProvider, EmbeddingVector, HashingEmbedder};
