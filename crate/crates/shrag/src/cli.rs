//! Command implementations behind the `shrag` binary: index, ask, sweep,
//! eval. Output files are written atomically (temp file + rename).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{IndexFile, PipelineConfig, INDEX_SCHEMA_VERSION};
use crate::document::{ingest, CorpusFormat, IngestReport};
use crate::engine::index::build_index;
use crate::error::{Error, Result};
use crate::eval::{load_eval_set, normalize_match_key, qsr, run_and_sweep, EvalQuery, SweepReport};
use crate::pipeline::{Pipeline, PipelineTrace, QueryRecord};
use crate::seed::fnv1a64;

/// Serialize as pretty JSON with a trailing newline and write atomically.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }
    let mut temp = PathBuf::from(path);
    temp.set_extension("tmp");
    std::fs::write(&temp, bytes).map_err(|e| Error::io(temp.display().to_string(), e))?;
    std::fs::rename(&temp, path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Build the retrieval artifact: ingest the corpus, build the inverted
/// index, serialize both into one index file. Returns the ingest report.
pub fn cmd_index(corpus_path: &Path, index_path: &Path) -> Result<IngestReport> {
    let (corpus, report) = ingest(corpus_path, CorpusFormat::JsonLines)?;
    let index = build_index(&corpus)?;
    let file = IndexFile {
        schema_version: INDEX_SCHEMA_VERSION,
        documents: corpus.documents().to_vec(),
        index,
    };
    write_json_atomic(index_path, &file)?;
    Ok(report)
}

/// Stable query id derived from the query text, so reruns of the same
/// question land on the same trace file.
pub fn query_id_for(text: &str) -> String {
    format!("q{:016x}", fnv1a64(text.as_bytes()))
}

#[derive(Debug)]
pub struct AskOutcome {
    pub answer: crate::answer::StructuredAnswer,
    pub trace: PipelineTrace,
    pub trace_path: PathBuf,
}

/// Run the full pipeline for one query and write the trace JSON under
/// `out_dir`. Pipeline failures surface the failing stage.
pub fn cmd_ask(
    query_text: &str,
    lang: &str,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<AskOutcome> {
    if query_text.trim().is_empty() {
        return Err(Error::Usage("empty query".to_string()));
    }
    let pipeline = Pipeline::from_config(config.clone())?;
    let query = QueryRecord::new(query_id_for(query_text), query_text, lang);
    let (answer, trace) = pipeline.run(&query).map_err(|failure| {
        Error::Config(format!(
            "stage {} failed: {}",
            failure.stage, failure.error
        ))
    })?;
    let trace_path = out_dir.join(format!("{}.json", trace.query.id));
    write_json_atomic(&trace_path, &trace)?;
    Ok(AskOutcome {
        answer,
        trace,
        trace_path,
    })
}

/// Run the AND sweep and write sweep.csv, sweep.json, and plot.dat.
pub fn cmd_sweep(
    evalset_path: &Path,
    config: &PipelineConfig,
    out_dir: &Path,
    repetitions: usize,
) -> Result<SweepReport> {
    let evals = load_eval_set(evalset_path)?;
    let pipeline = Pipeline::from_config(config.clone())?;
    let report = run_and_sweep(&evals, &pipeline, repetitions, config.seed)?;
    let per_condition = evals.len() * report.repetitions_run;
    if report.rows.iter().all(|r| r.errors >= per_condition) {
        return Err(Error::Config("every query failed in every condition".to_string()));
    }
    write_json_atomic(&out_dir.join("sweep.json"), &report)?;
    write_atomic(&out_dir.join("sweep.csv"), report.to_csv().as_bytes())?;
    write_atomic(&out_dir.join("plot.dat"), report.to_plot_data().as_bytes())?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct EvalSummary {
    pub qsr: f64,
    pub qsr_by_lang: BTreeMap<String, f64>,
    pub queries: usize,
    pub failures: usize,
}

/// Run ladder collection per query and score the retrieved sets: overall
/// QSR plus the per-language breakdown. A query failure counts as an
/// empty retrieved set.
pub fn cmd_eval(evalset_path: &Path, config: &PipelineConfig) -> Result<EvalSummary> {
    let evals = load_eval_set(evalset_path)?;
    let pipeline = Pipeline::from_config(config.clone())?;

    let mut scored: Vec<(EvalQuery, std::collections::BTreeSet<String>)> = Vec::new();
    let mut failures = 0usize;
    for eval in evals {
        let retrieved = match pipeline.collect_for_text(&eval.text, &eval.lang) {
            Ok(collect) => collect
                .outcome
                .documents
                .iter()
                .map(|d| d.id.clone())
                .collect(),
            Err(_) => {
                failures += 1;
                Default::default()
            }
        };
        scored.push((eval, retrieved));
    }
    if failures == scored.len() {
        return Err(Error::Config("every query failed".to_string()));
    }

    if config.normalized_matching {
        for (eval, retrieved) in scored.iter_mut() {
            eval.relevant_ids = eval.relevant_ids.iter().map(|s| normalize_match_key(s)).collect();
            *retrieved = retrieved.iter().map(|s| normalize_match_key(s)).collect();
        }
    }

    let overall = qsr(&scored)?;
    let mut by_lang: BTreeMap<String, Vec<(EvalQuery, std::collections::BTreeSet<String>)>> =
        BTreeMap::new();
    for (eval, retrieved) in scored.iter() {
        by_lang
            .entry(eval.lang.clone())
            .or_default()
            .push((eval.clone(), retrieved.clone()));
    }
    let qsr_by_lang = by_lang
        .into_iter()
        .map(|(lang, pairs)| Ok((lang, qsr(&pairs)?)))
        .collect::<Result<BTreeMap<String, f64>>>()?;

    Ok(EvalSummary {
        qsr: overall,
        qsr_by_lang,
        queries: scored.len(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(name: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
    }

    fn local_config(index_path: &Path) -> PipelineConfig {
        PipelineConfig {
            backend: crate::config::BackendConfig::Local {
                index_path: index_path.to_path_buf(),
            },
            embedder: crate::config::EmbedderConfig::Hashing {
                dim: 64,
                seed: Some(42),
            },
            record_timings: false,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn index_then_ask_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let index_path = dir.path().join("index.json");
        let report = cmd_index(&fixture("corpus.jsonl"), &index_path).unwrap();
        assert_eq!(report.accepted, 50);

        let config = local_config(&index_path);
        let out = cmd_ask(
            "What was the impact of the free textbook policy on mathematics education in elementary schools?",
            "en",
            &config,
            dir.path(),
        )
        .unwrap();
        assert!(out.trace_path.exists());
        assert!(!out.answer.title.is_empty());
        let reread: PipelineTrace =
            serde_json::from_str(&std::fs::read_to_string(&out.trace_path).unwrap()).unwrap();
        assert_eq!(reread, out.trace);
    }

    #[test]
    fn index_reports_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let index_path = dir.path().join("index.json");
        let report = cmd_index(&fixture("corpus_dup.jsonl"), &index_path).unwrap();
        assert_eq!(report.accepted, 2);
        assert_eq!(report.duplicate_id, 1);
    }

    #[test]
    fn index_missing_corpus_fails_with_path() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_index(Path::new("/no/such/corpus.jsonl"), &dir.path().join("i.json"))
            .unwrap_err();
        assert!(err.to_string().contains("/no/such/corpus.jsonl"));
    }

    #[test]
    fn ask_rejects_empty_query() {
        let config = PipelineConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_ask("   ", "en", &config, dir.path()).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn eval_fixture_reaches_full_qsr() {
        let dir = tempfile::tempdir().unwrap();
        let index_path = dir.path().join("index.json");
        cmd_index(&fixture("corpus.jsonl"), &index_path).unwrap();
        let config = local_config(&index_path);
        let summary = cmd_eval(&fixture("evalset.jsonl"), &config).unwrap();
        assert_eq!(summary.qsr, 100.0);
        assert_eq!(summary.failures, 0);
        assert!(summary.qsr_by_lang.values().all(|&v| v == 100.0));
    }

    #[test]
    fn eval_unreachable_relevant_set_gives_75() {
        let dir = tempfile::tempdir().unwrap();
        let index_path = dir.path().join("index.json");
        cmd_index(&fixture("corpus.jsonl"), &index_path).unwrap();
        let config = local_config(&index_path);
        let summary = cmd_eval(&fixture("evalset_qsr75.jsonl"), &config).unwrap();
        assert_eq!(summary.qsr, 75.0);
    }

    #[test]
    fn per_language_breakdown_averages_to_combined_on_equal_subsets() {
        let dir = tempfile::tempdir().unwrap();
        let index_path = dir.path().join("index.json");
        cmd_index(&fixture("corpus.jsonl"), &index_path).unwrap();
        let config = local_config(&index_path);
        let summary = cmd_eval(&fixture("evalset.jsonl"), &config).unwrap();
        // 5 en + 3 ko here, so check the weighted identity instead of the
        // equal-subset average: overall = Σ lang_rate * lang_count / total.
        let en = summary.qsr_by_lang["en"];
        let ko = summary.qsr_by_lang["ko"];
        let weighted = (en * 5.0 + ko * 3.0) / 8.0;
        assert!((summary.qsr - weighted).abs() < 1e-9);
    }
}
