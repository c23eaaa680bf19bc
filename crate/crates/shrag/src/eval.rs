//! Retrieval evaluation: query success rate, evidence coverage, and the
//! AND-operator sweep harness.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::document::{dedup_key, is_complete};
use crate::error::{Error, Result};
use crate::keywords::rank_and_truncate;
use crate::ladder::generate_and_variant;
use crate::parallel::map_indexed;
use crate::pipeline::Pipeline;
use crate::seed::derive_seed;

/// A query with its known relevant document ids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalQuery {
    pub query_id: String,
    pub text: String,
    pub lang: String,
    pub relevant_ids: BTreeSet<String>,
}

/// Load a JSON-lines eval set: {query_id, text, lang, relevant_ids}.
pub fn load_eval_set(path: impl AsRef<Path>) -> Result<Vec<EvalQuery>> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let q: EvalQuery = serde_json::from_str(line).map_err(|e| Error::Json {
            context: format!("{}:{}", path.display(), lineno + 1),
            message: e.to_string(),
        })?;
        if q.relevant_ids.is_empty() {
            return Err(Error::Json {
                context: format!("{}:{}", path.display(), lineno + 1),
                message: "relevant_ids must be non-empty".to_string(),
            });
        }
        out.push(q);
    }
    if out.is_empty() {
        return Err(Error::NoQueries);
    }
    Ok(out)
}

/// Normalization hook for title-keyed ground truth: case-fold, strip
/// punctuation, collapse whitespace.
pub fn normalize_match_key(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.chars() {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            for lc in c.to_lowercase() {
                out.push(lc);
            }
        } else {
            pending_space = true;
        }
    }
    out
}

fn success(relevant: &BTreeSet<String>, retrieved: &BTreeSet<String>) -> bool {
    relevant.iter().any(|id| retrieved.contains(id))
}

/// Query success rate over (query, retrieved) pairs: the percentage of
/// queries whose retrieved set contains at least one relevant document.
pub fn qsr(evals: &[(EvalQuery, BTreeSet<String>)]) -> Result<f64> {
    if evals.is_empty() {
        return Err(Error::NoQueries);
    }
    let hits = evals
        .iter()
        .filter(|(q, retrieved)| success(&q.relevant_ids, retrieved))
        .count();
    Ok(100.0 * hits as f64 / evals.len() as f64)
}

/// Fraction of a query's relevant documents present in the retrieved set.
pub fn evidence_coverage(eval: &EvalQuery, retrieved: &BTreeSet<String>) -> f64 {
    if eval.relevant_ids.is_empty() {
        return 0.0;
    }
    let hit = eval
        .relevant_ids
        .iter()
        .filter(|id| retrieved.contains(*id))
        .count();
    hit as f64 / eval.relevant_ids.len() as f64
}

/// Aggregates for one AND-count condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub and_count: usize,
    /// Mean over queries of |relevant ∩ retrieved| / |relevant|, averaged
    /// over repetitions.
    pub coverage_mean: f64,
    /// Pooled proportion: Σ|relevant ∩ retrieved| / Σ|relevant|.
    pub coverage_pooled: f64,
    /// Mean retrieved-set size per query.
    pub avg_docs: f64,
    /// Standard deviation of the per-repetition coverage means.
    pub stddev_coverage: f64,
    pub stddev_docs: f64,
    /// Queries that failed in this condition (counted once per repetition).
    pub errors: usize,
}

/// The sweep report: one row per AND count 0..=9.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub seed: u64,
    pub repetitions_requested: usize,
    pub repetitions_run: usize,
    /// Set when deterministic providers let the harness collapse
    /// repetitions to one.
    pub deterministic: bool,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_SCHEMA_VERSION: u32 = 1;
pub const SWEEP_MAX_AND: usize = 9;

/// Retrieval for one (query, and_count) condition: extraction, the AND
/// variant of the full keyword list, one backend search, completeness
/// filter, dedup. Returns the retrieved id set.
fn collect_and_variant(
    pipeline: &Pipeline,
    query: &EvalQuery,
    and_count: usize,
) -> Result<BTreeSet<String>> {
    let config = pipeline.config();
    let (en, target) = crate::keywords::extract_bilingual(
        &query.text,
        &query.lang,
        config.keyword_k,
        pipeline.components().extractor.as_ref(),
    )?;
    let mut merged = en;
    merged.extend(target);
    let keywords = rank_and_truncate(crate::keywords::split_compounds(merged))?;
    // Keyword lists shorter than 10 cap the usable AND count.
    let effective = and_count.min(keywords.len() - 1);
    let search_query = generate_and_variant(&keywords, effective)?;
    let docs = pipeline
        .components()
        .backend
        .search(&search_query.serialized, config.per_query_topk)?;
    Ok(docs
        .iter()
        .filter(|d| is_complete(d))
        .map(|d| dedup_key(d).to_string())
        .collect())
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn stddev(values: &[f64]) -> f64 {
    if values.len() <= 1 || values.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Run the AND sweep: for every AND count 0..=9, collect documents for
/// every query `repetitions` times (deterministic configurations collapse
/// to a single annotated repetition) and aggregate coverage and set size.
pub fn run_and_sweep(
    evals: &[EvalQuery],
    pipeline: &Pipeline,
    repetitions: usize,
    seed: u64,
) -> Result<SweepReport> {
    if evals.is_empty() {
        return Err(Error::NoQueries);
    }
    if repetitions == 0 {
        return Err(Error::Usage("repetitions must be >= 1".to_string()));
    }
    let deterministic = pipeline.config().is_deterministic();
    let repetitions_run = if deterministic { 1 } else { repetitions };

    let mut rows = Vec::with_capacity(SWEEP_MAX_AND + 1);
    for and_count in 0..=SWEEP_MAX_AND {
        let mut rep_coverages = Vec::with_capacity(repetitions_run);
        let mut rep_docs = Vec::with_capacity(repetitions_run);
        let mut pooled_hit = 0usize;
        let mut pooled_total = 0usize;
        let mut errors = 0usize;

        for rep in 0..repetitions_run {
            // Reserved for stochastic providers; recorded so reruns can
            // reproduce per-repetition streams.
            let _rep_seed = derive_seed(seed, &format!("sweep/and{and_count}/rep{rep}"));

            let results = map_indexed(evals, pipeline.config().workers, |_, query| {
                collect_and_variant(pipeline, query, and_count)
            });

            let mut coverages = Vec::with_capacity(evals.len());
            let mut sizes = Vec::with_capacity(evals.len());
            for (query, result) in evals.iter().zip(results) {
                match result {
                    Ok(retrieved) => {
                        let coverage = evidence_coverage(query, &retrieved);
                        pooled_hit += query
                            .relevant_ids
                            .iter()
                            .filter(|id| retrieved.contains(*id))
                            .count();
                        pooled_total += query.relevant_ids.len();
                        coverages.push(coverage);
                        sizes.push(retrieved.len() as f64);
                    }
                    Err(_) => {
                        errors += 1;
                        pooled_total += query.relevant_ids.len();
                        coverages.push(0.0);
                        sizes.push(0.0);
                    }
                }
            }
            rep_coverages.push(mean(&coverages));
            rep_docs.push(mean(&sizes));
        }

        rows.push(SweepRow {
            and_count,
            coverage_mean: mean(&rep_coverages),
            coverage_pooled: if pooled_total > 0 {
                pooled_hit as f64 / pooled_total as f64
            } else {
                0.0
            },
            avg_docs: mean(&rep_docs),
            stddev_coverage: stddev(&rep_coverages),
            stddev_docs: stddev(&rep_docs),
            errors,
        });
    }

    Ok(SweepReport {
        schema_version: SWEEP_SCHEMA_VERSION,
        seed,
        repetitions_requested: repetitions,
        repetitions_run,
        deterministic,
        rows,
    })
}

impl SweepReport {
    /// CSV with one row per AND count.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "and_count,coverage_mean,coverage_pooled,avg_docs,stddev_coverage,stddev_docs,errors\n",
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.and_count,
                row.coverage_mean,
                row.coverage_pooled,
                row.avg_docs,
                row.stddev_coverage,
                row.stddev_docs,
                row.errors
            ));
        }
        out
    }

    /// Plot-data file: x = and_count, y1 = coverage, y2 = avg_docs.
    pub fn to_plot_data(&self) -> String {
        let mut out = String::from("# and_count coverage_mean avg_docs\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{} {} {}\n",
                row.and_count, row.coverage_mean, row.avg_docs
            ));
        }
        out
    }
}
