//! Document model, corpus ingestion, completeness filtering, and dedup keys.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A retrievable unit: one record of the corpus, one hit of a search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    /// Opaque unique id within a corpus.
    pub id: String,
    pub title: String,
    /// May be empty; an empty abstract marks the document as incomplete.
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    /// May be empty.
    pub body: String,
    /// BCP-47 style primary tag, e.g. "ko", "en".
    pub lang: String,
    /// Identifier of the backend that produced the document. Local corpus
    /// records default to "local".
    #[serde(default = "default_source")]
    pub source: String,
}

fn default_source() -> String {
    "local".to_string()
}

impl Document {
    /// Text that gets embedded for re-ranking: title plus abstract.
    pub fn embedding_text(&self) -> String {
        format!("{} {}", self.title, self.abstract_text)
    }

    /// Text that gets indexed: title, abstract, and body.
    pub fn index_text(&self) -> String {
        format!("{} {} {}", self.title, self.abstract_text, self.body)
    }
}

/// A document is complete iff its abstract is non-empty after trimming.
/// Incomplete documents are dropped during collection.
pub fn is_complete(doc: &Document) -> bool {
    !doc.abstract_text.trim().is_empty()
}

/// Key under which duplicate retrieved documents collapse: the document id.
pub fn dedup_key(doc: &Document) -> &str {
    &doc.id
}

/// The searchable universe: an ordered document collection with an id index.
/// Immutable after ingest; share it behind an `Arc` across workers.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    index_of: HashMap<String, usize>,
}

impl Corpus {
    /// Build a corpus from documents, keeping the first occurrence of each
    /// id. Returns the corpus and the number of dropped duplicates.
    pub fn from_documents(docs: impl IntoIterator<Item = Document>) -> (Self, usize) {
        let mut corpus = Corpus::default();
        let mut duplicates = 0;
        for doc in docs {
            if !corpus.push(doc) {
                duplicates += 1;
            }
        }
        (corpus, duplicates)
    }

    /// Append one document; returns false (and drops it) when the id is
    /// already present.
    fn push(&mut self, doc: Document) -> bool {
        if self.index_of.contains_key(&doc.id) {
            return false;
        }
        self.index_of.insert(doc.id.clone(), self.documents.len());
        self.documents.push(doc);
        true
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn get(&self, position: usize) -> Option<&Document> {
        self.documents.get(position)
    }

    pub fn position_of(&self, id: &str) -> Option<usize> {
        self.index_of.get(id).copied()
    }

    pub fn get_by_id(&self, id: &str) -> Option<&Document> {
        self.position_of(id).and_then(|p| self.get(p))
    }
}

/// Supported corpus file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    /// UTF-8 JSON-lines, one document object per line.
    #[default]
    JsonLines,
}

/// Per-ingest accounting. Serialized as the three counts; the individual
/// record-level messages stay in memory for diagnostics.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub duplicate_id: usize,
    pub malformed: usize,
    #[serde(skip)]
    pub issues: Vec<String>,
}

/// Read a corpus file. Malformed records are tallied in the report, never
/// silently dropped; duplicate ids keep the first occurrence.
pub fn ingest(path: impl AsRef<Path>, format: CorpusFormat) -> Result<(Corpus, IngestReport)> {
    let CorpusFormat::JsonLines = format;
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);

    let mut corpus = Corpus::default();
    let mut report = IngestReport::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Document>(&line) {
            Ok(doc) if doc.id.is_empty() => {
                report.malformed += 1;
                report.issues.push(format!("line {}: empty id", lineno + 1));
            }
            Ok(doc) => {
                if corpus.push(doc) {
                    report.accepted += 1;
                } else {
                    report.duplicate_id += 1;
                    report
                        .issues
                        .push(format!("line {}: duplicate id", lineno + 1));
                }
            }
            Err(e) => {
                report.malformed += 1;
                report.issues.push(format!("line {}: {}", lineno + 1, e));
            }
        }
    }
    Ok((corpus, report))
}
