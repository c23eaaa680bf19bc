//! Run configuration: the knobs of every stage plus provider selection.
//! One JSON file; environment variables override only secrets.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::answer::{GenerationProvider, TemplateGenerator};
use crate::document::{ingest, Corpus, CorpusFormat};
use crate::engine::backend::{LocalBackend, RemoteBackend, SearchBackend};
use crate::engine::index::InvertedIndex;
use crate::error::{Error, Result};
use crate::keywords::{ExtractorProvider, HttpExtractor, StatisticalExtractor};
use crate::rerank::{EmbeddingProvider, HashingEmbedder, RemoteEmbedder};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    /// Embedded engine over an index file produced by `shrag index`.
    Local { index_path: PathBuf },
    /// Remote HTTP engine.
    Remote {
        base_url: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_retries")]
        retries: u32,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtractorConfig {
    /// Offline TF-IDF extractor over the local corpus.
    Statistical,
    /// LLM endpoint; falls back to statistical when the call fails.
    Llm {
        endpoint: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default)]
        fallback_statistical: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderConfig {
    /// Deterministic token-hashing embedder.
    Hashing {
        #[serde(default = "default_dim")]
        dim: usize,
        /// Omitted: derived from the run seed.
        #[serde(default)]
        seed: Option<u64>,
    },
    Remote {
        endpoint: String,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorConfig {
    /// Deterministic offline generator.
    Template,
    Llm {
        endpoint: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_max_tokens")]
        max_tokens: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecomposerConfig {
    #[default]
    Off,
    /// Identity decomposition; behaves exactly like Off.
    Passthrough,
    Llm {
        endpoint: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_max_tokens")]
        max_tokens: usize,
    },
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_retries() -> u32 {
    2
}

fn default_dim() -> usize {
    64
}

fn default_max_tokens() -> usize {
    1024
}

fn default_keyword_k() -> usize {
    10
}

fn default_per_query_topk() -> usize {
    10
}

fn default_rerank_k() -> usize {
    5
}

fn default_seed() -> u64 {
    42
}

fn default_workers() -> usize {
    1
}

fn default_embed_token_budget() -> usize {
    512
}

fn default_prompt_char_budget() -> usize {
    12_000
}

fn default_true() -> bool {
    true
}

fn default_backend() -> BackendConfig {
    BackendConfig::Local {
        index_path: PathBuf::from("index.json"),
    }
}

fn default_extractor() -> ExtractorConfig {
    ExtractorConfig::Statistical
}

fn default_embedder() -> EmbedderConfig {
    EmbedderConfig::Hashing {
        dim: default_dim(),
        seed: None,
    }
}

fn default_generator() -> GeneratorConfig {
    GeneratorConfig::Template
}

/// Everything a run needs. Defaults mirror the pipeline's standard
/// constants: 10 keywords, top-10 per query, top-5 after re-ranking.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PipelineConfig {
    /// Keywords requested per extraction call.
    #[serde(default = "default_keyword_k")]
    pub keyword_k: usize,
    /// Documents kept per ladder query.
    #[serde(default = "default_per_query_topk")]
    pub per_query_topk: usize,
    /// Documents kept after re-ranking.
    #[serde(default = "default_rerank_k")]
    pub rerank_k: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_backend")]
    pub backend: BackendConfig,
    #[serde(default = "default_extractor")]
    pub extractor: ExtractorConfig,
    #[serde(default = "default_embedder")]
    pub embedder: EmbedderConfig,
    #[serde(default = "default_generator")]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub decomposer: DecomposerConfig,
    /// Whitespace-chunk budget for texts sent to the embedder.
    #[serde(default = "default_embed_token_budget")]
    pub embed_token_budget: usize,
    /// Character budget for assembled generation prompts.
    #[serde(default = "default_prompt_char_budget")]
    pub prompt_char_budget: usize,
    /// Retry generation once when the answer fails to parse.
    #[serde(default = "default_true")]
    pub retry_on_parse_failure: bool,
    /// Abort collection when any ladder level fails after retries.
    #[serde(default)]
    pub fail_on_partial_collection: bool,
    /// Record wall-clock stage timings in traces. Disable for byte-stable
    /// golden outputs.
    #[serde(default = "default_true")]
    pub record_timings: bool,
    /// Evaluation matching: normalize ids/titles (case-fold, strip
    /// punctuation) before comparing.
    #[serde(default)]
    pub normalized_matching: bool,
    /// Corpus for the statistical extractor when the backend is remote.
    #[serde(default)]
    pub corpus_path: Option<PathBuf>,
    /// Directory with edited prompt templates (answer_<lang>.txt); the
    /// bundled templates apply when unset.
    #[serde(default)]
    pub template_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults are total")
    }
}

impl PipelineConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: PipelineConfig = serde_json::from_str(&raw).map_err(|e| Error::Json {
            context: path.display().to_string(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        fn at_least_one(name: &str, value: usize) -> Result<()> {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
            Ok(())
        }
        at_least_one("keyword_k", self.keyword_k)?;
        at_least_one("per_query_topk", self.per_query_topk)?;
        at_least_one("rerank_k", self.rerank_k)?;
        at_least_one("workers", self.workers)?;
        at_least_one("embed_token_budget", self.embed_token_budget)?;
        at_least_one("prompt_char_budget", self.prompt_char_budget)?;
        let (EmbedderConfig::Hashing { dim, .. } | EmbedderConfig::Remote { dim, .. }) =
            &self.embedder;
        if *dim < 8 {
            return Err(Error::Config(format!("embedder dim {dim} < 8")));
        }
        if matches!(self.backend, BackendConfig::Remote { .. })
            && matches!(self.extractor, ExtractorConfig::Statistical)
            && self.corpus_path.is_none()
        {
            return Err(Error::Config(
                "statistical extractor with a remote backend needs corpus_path".to_string(),
            ));
        }
        Ok(())
    }

    /// Whether every configured component is deterministic and offline.
    pub fn is_deterministic(&self) -> bool {
        matches!(self.backend, BackendConfig::Local { .. })
            && matches!(self.extractor, ExtractorConfig::Statistical)
            && matches!(self.embedder, EmbedderConfig::Hashing { .. })
            && matches!(self.generator, GeneratorConfig::Template)
            && !matches!(self.decomposer, DecomposerConfig::Llm { .. })
    }
}

/// The serialized retrieval artifact written by `shrag index`: the corpus
/// documents plus the prebuilt inverted index, in one self-contained file.
#[derive(Debug, Serialize, Deserialize)]
pub struct IndexFile {
    pub schema_version: u32,
    pub documents: Vec<crate::document::Document>,
    pub index: InvertedIndex,
}

pub const INDEX_SCHEMA_VERSION: u32 = 1;

impl IndexFile {
    pub fn load(path: impl AsRef<Path>) -> Result<(Corpus, InvertedIndex)> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let file: IndexFile = serde_json::from_str(&raw).map_err(|e| Error::Json {
            context: path.display().to_string(),
            message: e.to_string(),
        })?;
        if file.schema_version != INDEX_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "index file schema_version {} unsupported (expected {})",
                file.schema_version, INDEX_SCHEMA_VERSION
            )));
        }
        let (corpus, _) = Corpus::from_documents(file.documents);
        Ok((corpus, file.index))
    }
}

/// The instantiated providers of one run, built from a config.
pub struct Components {
    pub backend: Arc<dyn SearchBackend>,
    pub extractor: Arc<dyn ExtractorProvider>,
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub generator: Arc<dyn GenerationProvider>,
    /// Present only for an LLM decomposer; Off and Passthrough need none.
    pub decomposer: Option<Arc<dyn GenerationProvider>>,
    /// Corpus behind the local backend (used by the statistical extractor).
    pub corpus: Option<Arc<Corpus>>,
}

impl Components {
    /// Wire up every provider named in the config. Loads the index file
    /// for local backends; ingests `corpus_path` when the statistical
    /// extractor runs against a remote backend.
    pub fn build(config: &PipelineConfig) -> Result<Self> {
        let mut corpus: Option<Arc<Corpus>> = None;

        let backend: Arc<dyn SearchBackend> = match &config.backend {
            BackendConfig::Local { index_path } => {
                let (loaded, index) = IndexFile::load(index_path)?;
                let loaded = Arc::new(loaded);
                corpus = Some(loaded.clone());
                Arc::new(LocalBackend::new(loaded, Arc::new(index)))
            }
            BackendConfig::Remote {
                base_url,
                timeout_ms,
                retries,
            } => Arc::new(RemoteBackend::new(base_url.clone(), *timeout_ms, *retries)),
        };

        if corpus.is_none() {
            if let Some(path) = &config.corpus_path {
                let (ingested, _) = ingest(path, CorpusFormat::JsonLines)?;
                corpus = Some(Arc::new(ingested));
            }
        }

        let extractor: Arc<dyn ExtractorProvider> = match &config.extractor {
            ExtractorConfig::Statistical => {
                let corpus = corpus.as_ref().ok_or_else(|| {
                    Error::Config("statistical extractor needs a corpus".to_string())
                })?;
                Arc::new(StatisticalExtractor::new(corpus))
            }
            ExtractorConfig::Llm {
                endpoint,
                timeout_ms,
                fallback_statistical,
            } => {
                let http = HttpExtractor::new(endpoint.clone(), *timeout_ms, default_max_tokens())
                    .with_bundled_templates();
                if *fallback_statistical {
                    let corpus = corpus.as_ref().ok_or_else(|| {
                        Error::Config("statistical fallback needs a corpus".to_string())
                    })?;
                    Arc::new(FallbackExtractor {
                        primary: http,
                        fallback: StatisticalExtractor::new(corpus),
                    })
                } else {
                    Arc::new(http)
                }
            }
        };

        let embedder: Arc<dyn EmbeddingProvider> = match &config.embedder {
            EmbedderConfig::Hashing { dim, seed } => {
                let seed = seed.unwrap_or_else(|| derive_seed(config.seed, "embed"));
                Arc::new(HashingEmbedder::new(*dim, seed)?)
            }
            EmbedderConfig::Remote {
                endpoint,
                dim,
                timeout_ms,
            } => Arc::new(RemoteEmbedder::new(endpoint.clone(), *dim, *timeout_ms)),
        };

        let generator: Arc<dyn GenerationProvider> = match &config.generator {
            GeneratorConfig::Template => Arc::new(TemplateGenerator),
            GeneratorConfig::Llm {
                endpoint,
                timeout_ms,
                max_tokens,
            } => Arc::new(crate::answer::HttpGenerator::new(
                endpoint.clone(),
                *timeout_ms,
                *max_tokens,
            )),
        };

        let decomposer: Option<Arc<dyn GenerationProvider>> = match &config.decomposer {
            DecomposerConfig::Llm {
                endpoint,
                timeout_ms,
                max_tokens,
            } => Some(Arc::new(crate::answer::HttpGenerator::new(
                endpoint.clone(),
                *timeout_ms,
                *max_tokens,
            ))),
            DecomposerConfig::Off | DecomposerConfig::Passthrough => None,
        };

        Ok(Self {
            backend,
            extractor,
            embedder,
            generator,
            decomposer,
            corpus,
        })
    }
}

/// LLM extractor with a statistical safety net.
struct FallbackExtractor {
    primary: HttpExtractor,
    fallback: StatisticalExtractor,
}

impl ExtractorProvider for FallbackExtractor {
    fn extract(&self, query: &str, lang: &str, k: usize) -> Result<Vec<crate::keywords::Keyword>> {
        match self.primary.extract(query, lang, k) {
            Ok(kws) if !kws.is_empty() => Ok(kws),
            _ => self.fallback.extract(query, lang, k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_the_standard_constants() {
        let config = PipelineConfig::default();
        assert_eq!(config.keyword_k, 10);
        assert_eq!(config.per_query_topk, 10);
        assert_eq!(config.rerank_k, 5);
        assert!(config.validate().is_ok());
    }

    #[test]
    fn zero_knobs_rejected() {
        let config = PipelineConfig {
            rerank_k: 0,
            ..PipelineConfig::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn deterministic_detection() {
        let config = PipelineConfig::default();
        assert!(config.is_deterministic());
        let mut remote = config.clone();
        remote.generator = GeneratorConfig::Llm {
            endpoint: "http://example".to_string(),
            timeout_ms: 1000,
            max_tokens: 100,
        };
        assert!(!remote.is_deterministic());
    }

    #[test]
    fn remote_backend_with_statistical_extractor_needs_corpus() {
        let mut config = PipelineConfig {
            backend: BackendConfig::Remote {
                base_url: "http://example/search".to_string(),
                timeout_ms: 1000,
                retries: 0,
            },
            ..PipelineConfig::default()
        };
        assert!(config.validate().is_err());
        config.corpus_path = Some(PathBuf::from("corpus.jsonl"));
        assert!(config.validate().is_ok());
    }

    #[test]
    fn config_roundtrips_through_json() {
        let config = PipelineConfig::default();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(config, back);
    }
}
