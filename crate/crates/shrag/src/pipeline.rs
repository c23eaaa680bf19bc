//! End-to-end orchestration: keyword extraction, the OR ladder,
//! retrieval with dedup and completeness filtering, embedding re-rank,
//! and structured answer generation, with a per-stage trace.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::answer::{
    assemble_prompt, decompose_query, parse_structured, PromptTemplate, StructuredAnswer,
};
use crate::config::{Components, DecomposerConfig, PipelineConfig};
use crate::document::{dedup_key, is_complete, Document};
use crate::engine::backend::SearchBackend;
use crate::engine::index::ScoredDocument;
use crate::error::{Error, Result};
use crate::keywords::{extract_bilingual, rank_and_truncate, split_compounds, Keyword};
use crate::ladder::{generate_or_ladder, LadderSummary, QueryLadder};
use crate::parallel::map_indexed;
use crate::rerank::rerank_topk;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// One user query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub text: String,
    pub lang: String,
}

impl QueryRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, lang: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            lang: lang.into(),
        }
    }
}

/// Raw backend hits for one ladder level, pre-filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelHits {
    pub n: usize,
    pub doc_ids: Vec<String>,
}

/// (doc id, score) pair as stored in traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHit {
    pub id: String,
    pub score: f64,
}

/// Wall-clock stage durations in milliseconds; all zero when timing
/// recording is off (required for byte-stable golden traces).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub extract_ms: u64,
    pub ladder_ms: u64,
    pub collect_ms: u64,
    pub rerank_ms: u64,
    pub generate_ms: u64,
}

/// Per-sub-query stage outputs when the decomposer splits a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubRunTrace {
    pub sub_query: String,
    pub keywords: Vec<Keyword>,
    pub ladder: LadderSummary,
    pub per_query_hits: Vec<LevelHits>,
    pub collected: Vec<String>,
    pub top5: Vec<TraceHit>,
}

/// Everything one run did, stage by stage. Serializes to the trace JSON
/// written next to every answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub schema_version: u32,
    pub query: QueryRecord,
    pub keywords: Vec<Keyword>,
    pub ladder: LadderSummary,
    pub per_query_hits: Vec<LevelHits>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_levels: Vec<usize>,
    /// Ids after completeness filtering and dedup, first-seen order.
    pub collected: Vec<String>,
    /// Re-ranked ids with cosine scores, best first.
    pub top5: Vec<TraceHit>,
    pub answer: Option<StructuredAnswer>,
    pub timings: StageTimings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sub_runs: Vec<SubRunTrace>,
}

impl PipelineTrace {
    fn empty(query: QueryRecord) -> Self {
        Self {
            schema_version: TRACE_SCHEMA_VERSION,
            query,
            keywords: Vec::new(),
            ladder: LadderSummary { levels: Vec::new() },
            per_query_hits: Vec::new(),
            failed_levels: Vec::new(),
            collected: Vec::new(),
            top5: Vec::new(),
            answer: None,
            timings: StageTimings::default(),
            sub_runs: Vec::new(),
        }
    }

    /// Structural invariants every finished trace must satisfy.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for id in &self.collected {
            if !seen.insert(id) {
                return Err(Error::Config(format!("trace: duplicate collected id {id}")));
            }
        }
        for hit in &self.top5 {
            if !seen.contains(&hit.id) {
                return Err(Error::Config(format!(
                    "trace: top5 id {} not in collected",
                    hit.id
                )));
            }
        }
        if let Some(answer) = &self.answer {
            let top_ids: BTreeSet<&String> = self.top5.iter().map(|h| &h.id).collect();
            for cited in &answer.citations {
                if !top_ids.contains(cited) {
                    return Err(Error::Config(format!(
                        "trace: citation {cited} not in top5"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A pipeline failure: which stage broke, why, and the trace up to that
/// point.
#[derive(Debug)]
pub struct RunFailure {
    pub stage: &'static str,
    pub error: Error,
    pub trace: Box<PipelineTrace>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "pipeline stage {} failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for RunFailure {}

/// Output of [`collect_documents`].
#[derive(Debug)]
pub struct CollectOutcome {
    /// Complete, deduplicated documents in first-seen ladder order.
    pub documents: Vec<Document>,
    /// Raw per-level hits, broadest level first.
    pub per_level: Vec<LevelHits>,
    /// Levels whose backend call failed after retries.
    pub failed_levels: Vec<usize>,
}

/// Run every ladder query through the backend (broadest first, up to
/// `workers` in parallel), drop incomplete documents, and dedup by id
/// with first-seen-wins in ladder order. Level failures either abort
/// (`fail_on_partial`) or get recorded while collection continues.
pub fn collect_documents(
    ladder: &QueryLadder,
    backend: &dyn SearchBackend,
    per_query_topk: usize,
    workers: usize,
    fail_on_partial: bool,
) -> Result<CollectOutcome> {
    if ladder.is_empty() {
        return Err(Error::NoKeywords);
    }
    if per_query_topk == 0 {
        return Err(Error::Usage("per_query_topk must be >= 1".to_string()));
    }

    let results = map_indexed(&ladder.levels, workers, |_, level| {
        backend.search(&level.query.serialized, per_query_topk)
    });

    let mut per_level = Vec::with_capacity(results.len());
    let mut failed_levels = Vec::new();
    let mut first_error = None;
    let mut documents = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();

    for (level, result) in ladder.levels.iter().zip(results) {
        match result {
            Ok(docs) => {
                per_level.push(LevelHits {
                    n: level.n,
                    doc_ids: docs.iter().map(|d| d.id.clone()).collect(),
                });
                for doc in docs {
                    if !is_complete(&doc) {
                        continue;
                    }
                    if seen.insert(dedup_key(&doc).to_string()) {
                        documents.push(doc);
                    }
                }
            }
            Err(e) => {
                per_level.push(LevelHits {
                    n: level.n,
                    doc_ids: Vec::new(),
                });
                failed_levels.push(level.n);
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }

    if !failed_levels.is_empty() && (fail_on_partial || failed_levels.len() == ladder.len()) {
        return Err(Error::PartialCollection {
            failed_levels,
            message: first_error
                .map(|e| e.to_string())
                .unwrap_or_else(|| "backend failure".to_string()),
        });
    }

    Ok(CollectOutcome {
        documents,
        per_level,
        failed_levels,
    })
}

/// Keywords that survive the wire syntax: reserved operator characters
/// cannot appear inside query terms.
fn wire_safe(keywords: Vec<Keyword>) -> Vec<Keyword> {
    keywords
        .into_iter()
        .filter(|k| !k.surface.contains(['|', '+', '-']))
        .collect()
}

struct StageOutput {
    keywords: Vec<Keyword>,
    ladder: LadderSummary,
    per_query_hits: Vec<LevelHits>,
    failed_levels: Vec<usize>,
    collected_docs: Vec<Document>,
    top: Vec<ScoredDocument>,
    timings: StageTimings,
}

/// The pipeline bound to its providers. Construct once per config, run
/// any number of queries against it.
pub struct Pipeline {
    config: PipelineConfig,
    components: Components,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, components: Components) -> Self {
        Self { config, components }
    }

    pub fn from_config(config: PipelineConfig) -> Result<Self> {
        let components = Components::build(&config)?;
        Ok(Self::new(config, components))
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn components(&self) -> &Components {
        &self.components
    }

    fn ms(&self, since: Instant) -> u64 {
        if self.config.record_timings {
            since.elapsed().as_millis() as u64
        } else {
            0
        }
    }

    /// Stages 1-3 for one query text: keywords, ladder, collection.
    /// This is the retrieval surface the evaluation harness measures.
    pub fn collect_for_text(&self, text: &str, lang: &str) -> std::result::Result<StageCollect, RunFailure> {
        let trace_stub = |stage: &'static str, error: Error| RunFailure {
            stage,
            error,
            trace: Box::new(PipelineTrace::empty(QueryRecord::new("", text, lang))),
        };

        let started = Instant::now();
        let keywords = self
            .extract_keywords(text, lang)
            .map_err(|e| trace_stub("extract", e))?;
        let extract_ms = self.ms(started);

        let started = Instant::now();
        let keyword_set = rank_and_truncate(keywords).map_err(|e| trace_stub("extract", e))?;
        let ladder = generate_or_ladder(&keyword_set).map_err(|e| trace_stub("ladder", e))?;
        let ladder_ms = self.ms(started);

        let started = Instant::now();
        let outcome = collect_documents(
            &ladder,
            self.components.backend.as_ref(),
            self.config.per_query_topk,
            self.config.workers,
            self.config.fail_on_partial_collection,
        )
        .map_err(|e| trace_stub("collect", e))?;
        let collect_ms = self.ms(started);

        Ok(StageCollect {
            keywords: keyword_set.keywords().to_vec(),
            ladder_summary: LadderSummary::from(&ladder),
            outcome,
            timings: StageTimings {
                extract_ms,
                ladder_ms,
                collect_ms,
                rerank_ms: 0,
                generate_ms: 0,
            },
        })
    }

    /// Step 1: bilingual extraction, merge (English first), compound
    /// split, wire-syntax sanitation. Ranking happens in the caller.
    fn extract_keywords(&self, text: &str, lang: &str) -> Result<Vec<Keyword>> {
        let (en, target) = extract_bilingual(
            text,
            lang,
            self.config.keyword_k,
            self.components.extractor.as_ref(),
        )?;
        let mut merged = en;
        merged.extend(target);
        Ok(wire_safe(split_compounds(merged)))
    }

    fn run_stages(&self, text: &str, lang: &str) -> std::result::Result<StageOutput, (&'static str, Error)> {
        let collect = self
            .collect_for_text(text, lang)
            .map_err(|f| (f.stage, f.error))?;
        let StageCollect {
            keywords,
            ladder_summary,
            outcome,
            mut timings,
        } = collect;

        let started = Instant::now();
        if outcome.documents.is_empty() {
            return Err(("rerank", Error::EmptyDocumentSet));
        }
        let top = rerank_topk(
            text,
            &outcome.documents,
            self.config.rerank_k,
            self.components.embedder.as_ref(),
            self.config.embed_token_budget,
        )
        .map_err(|e| ("rerank", e))?;
        timings.rerank_ms = self.ms(started);

        Ok(StageOutput {
            keywords,
            ladder: ladder_summary,
            per_query_hits: outcome.per_level,
            failed_levels: outcome.failed_levels,
            collected_docs: outcome.documents,
            top,
            timings,
        })
    }

    /// Run the full pipeline for one query. On failure the partial trace
    /// rides along in the error.
    pub fn run(&self, query: &QueryRecord) -> std::result::Result<(StructuredAnswer, PipelineTrace), RunFailure> {
        let mut trace = PipelineTrace::empty(query.clone());
        let fail = |stage: &'static str, error: Error, trace: &PipelineTrace| RunFailure {
            stage,
            error,
            trace: Box::new(trace.clone()),
        };

        if query.text.trim().is_empty() {
            return Err(fail(
                "extract",
                Error::Usage("empty query".to_string()),
                &trace,
            ));
        }

        let sub_queries = match (&self.config.decomposer, &self.components.decomposer) {
            (DecomposerConfig::Off, _) => vec![query.text.clone()],
            (DecomposerConfig::Passthrough, _) | (DecomposerConfig::Llm { .. }, None) => {
                crate::answer::passthrough_decompose(&query.text)
            }
            (DecomposerConfig::Llm { .. }, Some(provider)) => {
                decompose_query(&query.text, &query.lang, provider.as_ref()).sub_queries
            }
        };

        // A decomposition that returns the original query unchanged is
        // indistinguishable from no decomposition, traces included.
        let single = sub_queries.len() == 1 && sub_queries[0] == query.text;

        let mut fused_docs: Vec<ScoredDocument> = Vec::new();
        let mut fused_ids: BTreeSet<String> = BTreeSet::new();
        let mut stage_error: Option<(&'static str, Error)> = None;

        for sub_query in &sub_queries {
            match self.run_stages(sub_query, &query.lang) {
                Ok(output) => {
                    if single {
                        trace.keywords = output.keywords.clone();
                        trace.ladder = output.ladder.clone();
                        trace.per_query_hits = output.per_query_hits.clone();
                        trace.failed_levels = output.failed_levels.clone();
                        trace.collected = output
                            .collected_docs
                            .iter()
                            .map(|d| d.id.clone())
                            .collect();
                        trace.top5 = output
                            .top
                            .iter()
                            .map(|h| TraceHit {
                                id: h.doc.id.clone(),
                                score: h.score,
                            })
                            .collect();
                        trace.timings = output.timings.clone();
                    } else {
                        trace.sub_runs.push(SubRunTrace {
                            sub_query: sub_query.clone(),
                            keywords: output.keywords.clone(),
                            ladder: output.ladder.clone(),
                            per_query_hits: output.per_query_hits.clone(),
                            collected: output
                                .collected_docs
                                .iter()
                                .map(|d| d.id.clone())
                                .collect(),
                            top5: output
                                .top
                                .iter()
                                .map(|h| TraceHit {
                                    id: h.doc.id.clone(),
                                    score: h.score,
                                })
                                .collect(),
                        });
                        if trace.keywords.is_empty() {
                            trace.keywords = output.keywords.clone();
                            trace.ladder = output.ladder.clone();
                            trace.per_query_hits = output.per_query_hits.clone();
                        }
                        for id in output.collected_docs.iter().map(|d| d.id.clone()) {
                            if !trace.collected.contains(&id) {
                                trace.collected.push(id);
                            }
                        }
                    }
                    for hit in output.top {
                        if fused_ids.insert(hit.doc.id.clone()) {
                            fused_docs.push(hit);
                        }
                    }
                }
                Err((stage, error)) => {
                    stage_error = Some((stage, error));
                    break;
                }
            }
        }

        if let Some((stage, error)) = stage_error {
            return Err(fail(stage, error, &trace));
        }
        if fused_docs.is_empty() {
            return Err(fail("rerank", Error::EmptyDocumentSet, &trace));
        }

        if !single {
            // Fused view: union of the sub-runs' top documents, re-numbered.
            trace.top5 = fused_docs
                .iter()
                .map(|h| TraceHit {
                    id: h.doc.id.clone(),
                    score: h.score,
                })
                .collect();
        }

        let started = Instant::now();
        let template = self.answer_template(&query.lang);
        let prompt = assemble_prompt(
            &query.text,
            &query.lang,
            &fused_docs,
            &template,
            self.config.prompt_char_budget,
        )
        .map_err(|e| fail("generate", e, &trace))?;
        let numbering: Vec<String> = fused_docs.iter().map(|d| d.doc.id.clone()).collect();

        let answer = self
            .generate_with_retry(&prompt, &template, &numbering)
            .map_err(|e| fail("generate", e, &trace))?;
        trace.timings.generate_ms = self.ms(started);

        trace.answer = Some(answer.clone());
        trace
            .validate()
            .map_err(|e| fail("generate", e, &trace))?;
        Ok((answer, trace))
    }

    fn answer_template(&self, lang: &str) -> PromptTemplate {
        if let Some(dir) = &self.config.template_dir {
            let candidate = dir.join(format!("answer_{lang}.txt"));
            if let Ok(template) = PromptTemplate::from_file(&candidate) {
                return template;
            }
            if let Ok(template) = PromptTemplate::from_file(dir.join("answer_en.txt")) {
                return template;
            }
        }
        PromptTemplate::bundled_answer(lang)
    }

    fn generate_with_retry(
        &self,
        prompt: &str,
        template: &PromptTemplate,
        numbering: &[String],
    ) -> Result<StructuredAnswer> {
        let raw = self.components.generator.generate(prompt)?;
        match parse_structured(&raw, &template.markers, numbering) {
            Ok(answer) => Ok(answer),
            Err(first_err) if self.config.retry_on_parse_failure => {
                let reminder = format!(
                    "{prompt}\n\nReminder: respond with exactly the three sections \
                     {:?}, {:?}, {:?}, each non-empty.",
                    template.markers.title, template.markers.introduction, template.markers.main_body
                );
                let raw = self
                    .components
                    .generator
                    .generate(&reminder)
                    .map_err(|_| first_err)?;
                parse_structured(&raw, &template.markers, numbering)
            }
            Err(e) => Err(e),
        }
    }
}

/// Output of stages 1-3.
pub struct StageCollect {
    pub keywords: Vec<Keyword>,
    pub ladder_summary: LadderSummary,
    pub outcome: CollectOutcome,
    pub timings: StageTimings,
}
