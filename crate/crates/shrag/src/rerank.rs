//! Embedding-based re-ranking: cosine similarity over a multilingual
//! embedding provider, top-k selection.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::document::Document;
use crate::engine::index::ScoredDocument;
use crate::engine::tokenize::tokenize;
use crate::error::{Error, Result};
use crate::seed::{fnv1a64, splitmix64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Rejects empty and all-zero vectors at the boundary.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ZeroVector("empty vector".to_string()));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroVector("all-zero vector".to_string()));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale(&self, factor: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

/// Text to vector. Same text must produce the same vector within one
/// instance; implementations must be safe for concurrent calls.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
    fn dim(&self) -> usize;
}

/// Cosine similarity; the result lies in [-1, 1] up to floating-point
/// accumulation error.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let mut dot = 0.0;
    let mut norm_a = 0.0;
    let mut norm_b = 0.0;
    for (x, y) in a.values.iter().zip(&b.values) {
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(Error::ZeroVector("cosine over a zero vector".to_string()));
    }
    Ok(dot / (norm_a.sqrt() * norm_b.sqrt()))
}

/// Keep only the first `budget` whitespace-separated chunks of `text`.
/// Bounds what goes to embedding providers with input-length limits.
pub fn truncate_tokens(text: &str, budget: usize) -> String {
    let mut chunks = text.split_whitespace();
    let mut out = String::new();
    for chunk in chunks.by_ref().take(budget) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(chunk);
    }
    out
}

/// Embed the query and each document's title+abstract (each distinct text
/// exactly once), score by cosine, and return the top `k` sorted by score
/// descending with ties broken by ascending doc id.
pub fn rerank_topk(
    query: &str,
    docs: &[Document],
    k: usize,
    provider: &dyn EmbeddingProvider,
    token_budget: usize,
) -> Result<Vec<ScoredDocument>> {
    if docs.is_empty() {
        return Err(Error::EmptyDocumentSet);
    }
    if k == 0 {
        return Err(Error::Usage("rerank k must be >= 1".to_string()));
    }

    let query_vec = provider.embed(&truncate_tokens(query, token_budget)).map_err(|e| {
        Error::Rerank {
            doc_id: "<query>".to_string(),
            message: e.to_string(),
        }
    })?;

    let mut cache: HashMap<String, EmbeddingVector> = HashMap::new();
    let mut scored: Vec<(f64, &Document)> = Vec::with_capacity(docs.len());
    for doc in docs {
        let text = truncate_tokens(&doc.embedding_text(), token_budget);
        let vector = match cache.get(&text) {
            Some(v) => v,
            None => {
                let v = provider.embed(&text).map_err(|e| Error::Rerank {
                    doc_id: doc.id.clone(),
                    message: e.to_string(),
                })?;
                cache.entry(text).or_insert(v)
            }
        };
        let score = cosine(&query_vec, vector).map_err(|e| Error::Rerank {
            doc_id: doc.id.clone(),
            message: e.to_string(),
        })?;
        scored.push((score, doc));
    }

    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
    scored.truncate(k);
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (score, doc))| ScoredDocument {
            doc: doc.clone(),
            score,
            rank: i + 1,
        })
        .collect())
}

/// Deterministic offline embedder: hashes each token to a coordinate
/// (seeded), accumulates counts, L2-normalizes. Texts sharing more tokens
/// land closer in cosine; good enough for tests and air-gapped runs.
pub struct HashingEmbedder {
    dim: usize,
    seed: u64,
}

impl HashingEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 8 {
            return Err(Error::Config(format!("hashing embedder dim {dim} < 8")));
        }
        Ok(Self { dim, seed })
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let tokens = tokenize(text, "");
        if tokens.is_empty() {
            return Err(Error::EmptyEmbedText);
        }
        let mut values = vec![0.0f64; self.dim];
        for token in tokens {
            let h = splitmix64(self.seed ^ fnv1a64(token.as_bytes()));
            values[(h % self.dim as u64) as usize] += 1.0;
        }
        let norm: f64 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in values.iter_mut() {
            *v /= norm;
        }
        EmbeddingVector::new(values)
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

/// Remote embedding service: POST {"texts": [..]} and get back
/// {"vectors": [[..]], "dim": n}.
pub struct RemoteEmbedder {
    endpoint: String,
    dim: usize,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, dim: usize, timeout_ms: u64) -> Self {
        let config = ureq::config::Config::builder()
            .timeout_global(Some(std::time::Duration::from_millis(timeout_ms)))
            .build();
        Self {
            endpoint: endpoint.into(),
            dim,
            agent: ureq::Agent::new_with_config(config),
        }
    }
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
    #[allow(dead_code)]
    dim: usize,
}

impl EmbeddingProvider for RemoteEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let payload = serde_json::json!({ "texts": [text] });
        let mut response = self
            .agent
            .post(&self.endpoint)
            .send_json(&payload)
            .map_err(|e| Error::Provider {
                provider: "embedder".to_string(),
                message: e.to_string(),
            })?;
        let parsed: EmbedResponse =
            response
                .body_mut()
                .read_json()
                .map_err(|e| Error::Provider {
                    provider: "embedder".to_string(),
                    message: e.to_string(),
                })?;
        let vector = parsed
            .vectors
            .into_iter()
            .next()
            .ok_or_else(|| Error::Provider {
                provider: "embedder".to_string(),
                message: "empty vectors array".to_string(),
            })?;
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                left: vector.len(),
                right: self.dim,
            });
        }
        EmbeddingVector::new(vector)
    }

    fn dim(&self) -> usize {
        self.dim
    }
}
