//! C ABI for the retrieval pipeline, so other languages can bind without
//! going through Rust. The surface is deliberately small: open an engine
//! over a corpus file, run Boolean searches, run the full deterministic
//! ask pipeline, and read results through accessors.
//!
//! Conventions:
//! - Every function that can fail returns a [`ShragStatus`]; outputs come
//!   back through out-pointers.
//! - On failure, `shrag_last_error_message` returns a thread-local,
//!   NUL-terminated description valid until the next call on the same
//!   thread.
//! - Handles (`ShragEngine`, `ShragResults`) are opaque; free them with
//!   their matching `_close`/`_free` function, exactly once.
//! - Strings returned via out-pointers are owned by the caller and must
//!   be released with `shrag_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::sync::Arc;

use shrag::config::{BackendConfig, Components, EmbedderConfig, PipelineConfig};
use shrag::document::{ingest, Corpus, CorpusFormat};
use shrag::engine::index::build_index;
use shrag::engine::LocalBackend;
use shrag::keywords::StatisticalExtractor;
use shrag::pipeline::{Pipeline, QueryRecord};
use shrag::rerank::HashingEmbedder;
use shrag::TemplateGenerator;

/// Result codes for every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShragStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    IoError = 3,
    ParseError = 4,
    PipelineError = 5,
    InternalError = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: impl AsRef<str>) {
    let sanitized = message.as_ref().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(err: &shrag::Error) -> ShragStatus {
    match err {
        shrag::Error::Io { .. } => ShragStatus::IoError,
        shrag::Error::QueryParse { .. } | shrag::Error::Json { .. } => ShragStatus::ParseError,
        _ => ShragStatus::PipelineError,
    }
}

/// Message for the most recent failure on this thread. Borrowed; valid
/// until the next shrag call on the same thread. Never NULL.
#[no_mangle]
pub extern "C" fn shrag_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// An opened corpus: documents, inverted index, and the deterministic
/// offline pipeline (statistical keywords, hashing embedder, template
/// generator) wired over them.
pub struct ShragEngine {
    corpus: Arc<Corpus>,
    backend: Arc<LocalBackend>,
    pipeline: Pipeline,
}

/// One Boolean search result list. Ids remain valid until the list is
/// freed.
pub struct ShragResults {
    ids: Vec<CString>,
    scores: Vec<f64>,
}

unsafe fn read_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, ShragStatus> {
    if ptr.is_null() {
        set_last_error(format!("{name} is NULL"));
        return Err(ShragStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error(format!("{name} is not valid UTF-8"));
        ShragStatus::InvalidUtf8
    })
}

fn open_engine(corpus_path: &str, seed: u64) -> Result<ShragEngine, (ShragStatus, String)> {
    let (corpus, _report) = ingest(Path::new(corpus_path), CorpusFormat::JsonLines)
        .map_err(|e| (status_for(&e), e.to_string()))?;
    let corpus = Arc::new(corpus);
    let index = Arc::new(build_index(&corpus).map_err(|e| (status_for(&e), e.to_string()))?);
    let backend = Arc::new(LocalBackend::new(corpus.clone(), index));

    let config = PipelineConfig {
        backend: BackendConfig::Local {
            index_path: corpus_path.into(),
        },
        embedder: EmbedderConfig::Hashing {
            dim: 64,
            seed: Some(seed),
        },
        seed,
        record_timings: false,
        ..PipelineConfig::default()
    };
    let embedder = HashingEmbedder::new(64, seed).map_err(|e| (status_for(&e), e.to_string()))?;
    let components = Components {
        backend: backend.clone(),
        extractor: Arc::new(StatisticalExtractor::new(&corpus)),
        embedder: Arc::new(embedder),
        generator: Arc::new(TemplateGenerator),
        decomposer: None,
        corpus: Some(corpus.clone()),
    };
    Ok(ShragEngine {
        corpus,
        backend,
        pipeline: Pipeline::new(config, components),
    })
}

/// Open an engine over a JSON-lines corpus file. `seed` drives every
/// pseudo-random component, so equal (corpus, seed, query) give equal
/// answers. On success `*out` owns the engine.
///
/// # Safety
/// `corpus_path` must be a NUL-terminated string and `out` a valid
/// pointer; the returned engine must be released with
/// [`shrag_engine_close`].
#[no_mangle]
pub unsafe extern "C" fn shrag_engine_open(
    corpus_path: *const c_char,
    seed: u64,
    out: *mut *mut ShragEngine,
) -> ShragStatus {
    if out.is_null() {
        set_last_error("out is NULL");
        return ShragStatus::NullArgument;
    }
    *out = std::ptr::null_mut();
    let path = match read_str(corpus_path, "corpus_path") {
        Ok(s) => s,
        Err(status) => return status,
    };
    match open_engine(path, seed) {
        Ok(engine) => {
            *out = Box::into_raw(Box::new(engine));
            ShragStatus::Ok
        }
        Err((status, message)) => {
            set_last_error(message);
            status
        }
    }
}

/// Number of documents in the engine's corpus; 0 for NULL.
///
/// # Safety
/// `engine` must be NULL or a live pointer from [`shrag_engine_open`].
#[no_mangle]
pub unsafe extern "C" fn shrag_engine_doc_count(engine: *const ShragEngine) -> u64 {
    if engine.is_null() {
        return 0;
    }
    (*engine).corpus.len() as u64
}

/// Release an engine. NULL is a no-op.
///
/// # Safety
/// `engine` must be NULL or a pointer from [`shrag_engine_open`] that has
/// not been closed yet.
#[no_mangle]
pub unsafe extern "C" fn shrag_engine_close(engine: *mut ShragEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Boolean search: `query` uses the wire syntax (`|` OR, `+` AND,
/// leading `-` NOT), `topk` bounds the result count. On success `*out`
/// owns a result list.
///
/// # Safety
/// `engine` must be a live engine, `query` a NUL-terminated string, and
/// `out` a valid pointer; release results with [`shrag_results_free`].
#[no_mangle]
pub unsafe extern "C" fn shrag_search(
    engine: *const ShragEngine,
    query: *const c_char,
    topk: u64,
    out: *mut *mut ShragResults,
) -> ShragStatus {
    if engine.is_null() || out.is_null() {
        set_last_error("engine or out is NULL");
        return ShragStatus::NullArgument;
    }
    *out = std::ptr::null_mut();
    let query = match read_str(query, "query") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let ast = match shrag::parse_query(query) {
        Ok(ast) => ast,
        Err(e) => {
            set_last_error(e.to_string());
            return status_for(&e);
        }
    };
    let hits = shrag::search_topk(
        &ast,
        (*engine).backend_index(),
        &(*engine).corpus,
        topk as usize,
    );
    let mut ids = Vec::with_capacity(hits.len());
    let mut scores = Vec::with_capacity(hits.len());
    for hit in hits {
        match CString::new(hit.doc.id) {
            Ok(id) => {
                ids.push(id);
                scores.push(hit.score);
            }
            Err(_) => {
                set_last_error("document id contains a NUL byte");
                return ShragStatus::InternalError;
            }
        }
    }
    *out = Box::into_raw(Box::new(ShragResults { ids, scores }));
    ShragStatus::Ok
}

impl ShragEngine {
    fn backend_index(&self) -> &shrag::InvertedIndex {
        self.backend.index()
    }
}

/// Number of hits in a result list; 0 for NULL.
///
/// # Safety
/// `results` must be NULL or a live pointer from [`shrag_search`].
#[no_mangle]
pub unsafe extern "C" fn shrag_results_len(results: *const ShragResults) -> u64 {
    if results.is_null() {
        return 0;
    }
    (*results).ids.len() as u64
}

/// Document id of hit `i` (rank order), or NULL when out of range. The
/// pointer stays valid until the result list is freed.
///
/// # Safety
/// `results` must be NULL or a live pointer from [`shrag_search`].
#[no_mangle]
pub unsafe extern "C" fn shrag_results_id(results: *const ShragResults, i: u64) -> *const c_char {
    if results.is_null() {
        return std::ptr::null();
    }
    let results = &*results;
    match results.ids.get(i as usize) {
        Some(id) => id.as_ptr(),
        None => std::ptr::null(),
    }
}

/// BM25 score of hit `i`, or NaN when out of range.
///
/// # Safety
/// `results` must be NULL or a live pointer from [`shrag_search`].
#[no_mangle]
pub unsafe extern "C" fn shrag_results_score(results: *const ShragResults, i: u64) -> f64 {
    if results.is_null() {
        return f64::NAN;
    }
    let results = &*results;
    results.scores.get(i as usize).copied().unwrap_or(f64::NAN)
}

/// Release a result list. NULL is a no-op.
///
/// # Safety
/// `results` must be NULL or a pointer from [`shrag_search`] that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn shrag_results_free(results: *mut ShragResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}

/// Run the full pipeline (keywords, OR ladder, retrieval, re-rank,
/// answer) for one query. On success `*out_json` owns a NUL-terminated
/// JSON trace: query, keywords, ladder, per-level hits, collected ids,
/// top5 scores, and the structured answer.
///
/// # Safety
/// `engine` must be a live engine, `query`/`lang` NUL-terminated strings,
/// and `out_json` a valid pointer; release the string with
/// [`shrag_string_free`].
#[no_mangle]
pub unsafe extern "C" fn shrag_ask(
    engine: *const ShragEngine,
    query: *const c_char,
    lang: *const c_char,
    out_json: *mut *mut c_char,
) -> ShragStatus {
    if engine.is_null() || out_json.is_null() {
        set_last_error("engine or out_json is NULL");
        return ShragStatus::NullArgument;
    }
    *out_json = std::ptr::null_mut();
    let query = match read_str(query, "query") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let lang = match read_str(lang, "lang") {
        Ok(s) => s,
        Err(status) => return status,
    };

    let record = QueryRecord::new(shrag::cli::query_id_for(query), query, lang);
    let trace = match (*engine).pipeline.run(&record) {
        Ok((_answer, trace)) => trace,
        Err(failure) => {
            set_last_error(format!("stage {}: {}", failure.stage, failure.error));
            return ShragStatus::PipelineError;
        }
    };
    let json = match serde_json::to_string_pretty(&trace) {
        Ok(json) => json,
        Err(e) => {
            set_last_error(e.to_string());
            return ShragStatus::InternalError;
        }
    };
    match CString::new(json) {
        Ok(s) => {
            *out_json = s.into_raw();
            ShragStatus::Ok
        }
        Err(_) => {
            set_last_error("trace JSON contains a NUL byte");
            ShragStatus::InternalError
        }
    }
}

/// Release a string returned through an out-pointer. NULL is a no-op.
///
/// # Safety
/// `s` must be NULL or a pointer produced by this library that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn shrag_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn corpus_file() -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        let lines = [
            r#"{"id":"f1","title":"free textbook policy","abstract":"Free textbooks reached every school under the policy.","body":"","lang":"en"}"#,
            r#"{"id":"f2","title":"solar energy","abstract":"Solar panels raise renewable capacity.","body":"","lang":"en"}"#,
            r#"{"id":"f3","title":"textbook logistics","abstract":"Textbook delivery to rural schools.","body":"","lang":"en"}"#,
        ];
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f
    }

    fn open(path: &std::path::Path) -> *mut ShragEngine {
        let c_path = CString::new(path.to_str().unwrap()).unwrap();
        let mut engine: *mut ShragEngine = std::ptr::null_mut();
        let status = unsafe { shrag_engine_open(c_path.as_ptr(), 42, &mut engine) };
        assert_eq!(status, ShragStatus::Ok);
        assert!(!engine.is_null());
        engine
    }

    #[test]
    fn open_search_close() {
        let f = corpus_file();
        let engine = open(f.path());
        unsafe {
            assert_eq!(shrag_engine_doc_count(engine), 3);

            let query = CString::new("textbook|solar").unwrap();
            let mut results: *mut ShragResults = std::ptr::null_mut();
            let status = shrag_search(engine, query.as_ptr(), 10, &mut results);
            assert_eq!(status, ShragStatus::Ok);
            assert_eq!(shrag_results_len(results), 3);

            let first = CStr::from_ptr(shrag_results_id(results, 0)).to_str().unwrap();
            assert!(["f1", "f2", "f3"].contains(&first));
            assert!(shrag_results_score(results, 0) >= shrag_results_score(results, 1));
            assert!(shrag_results_id(results, 99).is_null());
            assert!(shrag_results_score(results, 99).is_nan());

            shrag_results_free(results);
            shrag_engine_close(engine);
        }
    }

    #[test]
    fn ask_returns_parseable_trace_json() {
        let f = corpus_file();
        let engine = open(f.path());
        unsafe {
            let query = CString::new("how did the free textbook policy reach schools").unwrap();
            let lang = CString::new("en").unwrap();
            let mut json: *mut c_char = std::ptr::null_mut();
            let status = shrag_ask(engine, query.as_ptr(), lang.as_ptr(), &mut json);
            assert_eq!(status, ShragStatus::Ok, "last error: {:?}", CStr::from_ptr(
                shrag_last_error_message()
            ));
            let text = CStr::from_ptr(json).to_str().unwrap().to_string();
            let value: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(value["schema_version"], 1);
            assert!(!value["answer"]["title"].as_str().unwrap().is_empty());
            shrag_string_free(json);
            shrag_engine_close(engine);
        }
    }

    #[test]
    fn null_arguments_are_rejected_not_crashed() {
        unsafe {
            let mut engine: *mut ShragEngine = std::ptr::null_mut();
            assert_eq!(
                shrag_engine_open(std::ptr::null(), 1, &mut engine),
                ShragStatus::NullArgument
            );
            assert_eq!(shrag_engine_doc_count(std::ptr::null()), 0);
            assert_eq!(shrag_results_len(std::ptr::null()), 0);
            assert!(shrag_results_id(std::ptr::null(), 0).is_null());
            shrag_results_free(std::ptr::null_mut());
            shrag_engine_close(std::ptr::null_mut());
            shrag_string_free(std::ptr::null_mut());
        }
    }

    #[test]
    fn open_missing_file_reports_io_error() {
        let c_path = CString::new("/no/such/corpus.jsonl").unwrap();
        let mut engine: *mut ShragEngine = std::ptr::null_mut();
        let status = unsafe { shrag_engine_open(c_path.as_ptr(), 1, &mut engine) };
        assert_eq!(status, ShragStatus::IoError);
        assert!(engine.is_null());
        let message = unsafe { CStr::from_ptr(shrag_last_error_message()) };
        assert!(message.to_str().unwrap().contains("/no/such/corpus.jsonl"));
    }

    #[test]
    fn bad_query_reports_parse_error_with_offset() {
        let f = corpus_file();
        let engine = open(f.path());
        unsafe {
            let query = CString::new("a||b").unwrap();
            let mut results: *mut ShragResults = std::ptr::null_mut();
            let status = shrag_search(engine, query.as_ptr(), 5, &mut results);
            assert_eq!(status, ShragStatus::ParseError);
            let message = CStr::from_ptr(shrag_last_error_message()).to_str().unwrap();
            assert!(message.contains("byte 2"), "message: {message}");
            shrag_engine_close(engine);
        }
    }

    #[test]
    fn ask_same_seed_reproduces() {
        let f = corpus_file();
        let run = || {
            let engine = open(f.path());
            unsafe {
                let query = CString::new("free textbook policy in schools").unwrap();
                let lang = CString::new("en").unwrap();
                let mut json: *mut c_char = std::ptr::null_mut();
                assert_eq!(
                    shrag_ask(engine, query.as_ptr(), lang.as_ptr(), &mut json),
                    ShragStatus::Ok
                );
                let text = CStr::from_ptr(json).to_str().unwrap().to_string();
                shrag_string_free(json);
                shrag_engine_close(engine);
                text
            }
        };
        assert_eq!(run(), run());
    }
}
