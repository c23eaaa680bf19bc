//! Inverted index, exact Boolean evaluation, and BM25 top-k scoring.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::document::{Corpus, Document};
use crate::engine::query::QueryAst;
use crate::engine::tokenize::tokenize;
use crate::error::{Error, Result};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// A document paired with the relevance score of the stage that produced
/// it (BM25 here, cosine in the re-ranker) and its 1-based rank.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoredDocument {
    pub doc: Document,
    pub score: f64,
    pub rank: usize,
}

/// Token to postings map over one corpus. Postings are
/// (corpus position, term frequency) pairs, strictly increasing by
/// position. BTreeMap keeps serialization byte-deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<(u32, u32)>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    doc_count: usize,
}

impl InvertedIndex {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, position: usize) -> u32 {
        self.doc_lengths[position]
    }

    pub fn postings(&self, token: &str) -> &[(u32, u32)] {
        self.postings.get(token).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Number of documents containing `token`.
    pub fn document_frequency(&self, token: &str) -> usize {
        self.postings(token).len()
    }
}

/// Index every document's title, abstract, and body.
pub fn build_index(corpus: &Corpus) -> Result<InvertedIndex> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
    let mut doc_lengths = Vec::with_capacity(corpus.len());

    for (position, doc) in corpus.documents().iter().enumerate() {
        let tokens = tokenize(&doc.index_text(), &doc.lang);
        doc_lengths.push(tokens.len() as u32);

        let mut freqs: BTreeMap<String, u32> = BTreeMap::new();
        for token in tokens {
            *freqs.entry(token).or_insert(0) += 1;
        }
        for (token, tf) in freqs {
            postings.entry(token).or_default().push((position as u32, tf));
        }
    }

    let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
    Ok(InvertedIndex {
        postings,
        avg_doc_length: total as f64 / doc_lengths.len() as f64,
        doc_count: doc_lengths.len(),
        doc_lengths,
    })
}

/// Exact set semantics: Term selects documents containing the token, And
/// intersects, Or unions, Not complements within the corpus. Unknown
/// tokens select the empty set.
pub fn evaluate_boolean(ast: &QueryAst, index: &InvertedIndex) -> BTreeSet<usize> {
    match ast {
        QueryAst::Term(token) => index
            .postings(token)
            .iter()
            .map(|&(pos, _)| pos as usize)
            .collect(),
        QueryAst::And(children) => {
            let mut iter = children.iter();
            let mut acc = evaluate_boolean(iter.next().expect("And has children"), index);
            for child in iter {
                let next = evaluate_boolean(child, index);
                acc = acc.intersection(&next).copied().collect();
                if acc.is_empty() {
                    break;
                }
            }
            acc
        }
        QueryAst::Or(children) => {
            let mut acc = BTreeSet::new();
            for child in children {
                acc.extend(evaluate_boolean(child, index));
            }
            acc
        }
        QueryAst::Not(child) => {
            let inner = evaluate_boolean(child, index);
            (0..index.doc_count()).filter(|p| !inner.contains(p)).collect()
        }
    }
}

fn bm25_idf(df: usize, n: usize) -> f64 {
    (1.0 + (n as f64 - df as f64 + 0.5) / (df as f64 + 0.5)).ln()
}

fn bm25_tf(tf: u32, doc_len: u32, avg_doc_length: f64) -> f64 {
    let tf = tf as f64;
    let norm = if avg_doc_length > 0.0 {
        BM25_K1 * (1.0 - BM25_B + BM25_B * doc_len as f64 / avg_doc_length)
    } else {
        BM25_K1 * (1.0 - BM25_B)
    };
    tf * (BM25_K1 + 1.0) / (tf + norm)
}

/// BM25 score of one document for a set of query terms: the sum of the
/// per-term contributions of the terms the document contains.
fn bm25_score(position: usize, terms: &[&str], index: &InvertedIndex) -> f64 {
    let mut score = 0.0;
    for term in terms {
        let postings = index.postings(term);
        if postings.is_empty() {
            continue;
        }
        if let Ok(i) = postings.binary_search_by_key(&(position as u32), |&(p, _)| p) {
            let idf = bm25_idf(postings.len(), index.doc_count());
            score += idf * bm25_tf(postings[i].1, index.doc_length(position), index.avg_doc_length());
        }
    }
    score
}

/// Evaluate `ast`, score matches by BM25 over the query's positive terms,
/// and return the top `k` (score descending, ties by ascending doc id).
pub fn search_topk(
    ast: &QueryAst,
    index: &InvertedIndex,
    corpus: &Corpus,
    k: usize,
) -> Vec<ScoredDocument> {
    let matches = evaluate_boolean(ast, index);
    let terms = ast.positive_terms();

    let mut scored: Vec<(f64, &Document)> = matches
        .into_iter()
        .map(|pos| {
            let doc = corpus.get(pos).expect("posting position within corpus");
            (bm25_score(pos, &terms, index), doc)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
    scored.truncate(k);
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (score, doc))| ScoredDocument {
            doc: doc.clone(),
            score,
            rank: i + 1,
        })
        .collect()
}
