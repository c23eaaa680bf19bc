//! Search backend abstraction: the embedded engine and a remote HTTP
//! engine are interchangeable behind `SearchBackend`.

use std::sync::Arc;
use std::time::Duration;

use crate::document::{Corpus, Document};
use crate::engine::index::{search_topk, InvertedIndex};
use crate::engine::query::parse_query;
use crate::error::{Error, Result};

/// One search call: a serialized wire-syntax query in, at most `topk`
/// documents out. Implementations must be safe to call from multiple
/// workers at once.
pub trait SearchBackend: Send + Sync {
    fn search(&self, serialized_query: &str, topk: usize) -> Result<Vec<Document>>;
}

/// The embedded engine: parse, evaluate, BM25-rank against a local corpus.
pub struct LocalBackend {
    corpus: Arc<Corpus>,
    index: Arc<InvertedIndex>,
}

impl LocalBackend {
    pub fn new(corpus: Arc<Corpus>, index: Arc<InvertedIndex>) -> Self {
        Self { corpus, index }
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }
}

impl SearchBackend for LocalBackend {
    fn search(&self, serialized_query: &str, topk: usize) -> Result<Vec<Document>> {
        let ast = parse_query(serialized_query)?;
        let hits = search_topk(&ast, &self.index, &self.corpus, topk);
        Ok(hits.into_iter().map(|h| h.doc).collect())
    }
}

/// A remote engine spoken to over HTTP GET. The query goes in the `q`
/// parameter, the size limit in `topk`; the response is a JSON array of
/// corpus-format document objects.
pub struct RemoteBackend {
    base_url: String,
    retries: u32,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(base_url: impl Into<String>, timeout_ms: u64, retries: u32) -> Self {
        let config = ureq::config::Config::builder()
            .timeout_global(Some(Duration::from_millis(timeout_ms)))
            .build();
        Self {
            base_url: base_url.into(),
            retries,
            agent: ureq::Agent::new_with_config(config),
        }
    }

    fn url_for(&self, query: &str, topk: usize) -> String {
        format!(
            "{}?q={}&topk={}",
            self.base_url,
            percent_encode(query),
            topk
        )
    }

    fn call_once(&self, query: &str, topk: usize) -> Result<Vec<Document>> {
        let url = self.url_for(query, topk);
        let mut response = self.agent.get(&url).call().map_err(|e| Error::Backend {
            query: query.to_string(),
            message: e.to_string(),
            retriable: is_retriable(&e),
        })?;
        let docs: Vec<Document> =
            response
                .body_mut()
                .read_json()
                .map_err(|e| Error::Backend {
                    query: query.to_string(),
                    message: format!("bad response body: {e}"),
                    retriable: false,
                })?;
        Ok(docs)
    }
}

fn is_retriable(err: &ureq::Error) -> bool {
    match err {
        ureq::Error::StatusCode(code) => *code >= 500,
        ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed => true,
        _ => false,
    }
}

impl SearchBackend for RemoteBackend {
    fn search(&self, serialized_query: &str, topk: usize) -> Result<Vec<Document>> {
        let mut last_err = None;
        for _ in 0..=self.retries {
            match self.call_once(serialized_query, topk) {
                Ok(mut docs) => {
                    docs.truncate(topk);
                    return Ok(docs);
                }
                Err(e) => {
                    let giving_up = !e.is_retriable();
                    last_err = Some(e);
                    if giving_up {
                        break;
                    }
                }
            }
        }
        Err(last_err.expect("at least one attempt"))
    }
}

/// Minimal query-string escaping for the characters that matter here:
/// the wire syntax (`+`, `|`, `-`) plus anything non-ASCII-unreserved.
fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'.' | b'_' | b'~' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{ingest, CorpusFormat};
    use crate::engine::index::build_index;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    #[test]
    fn local_backend_delegates_to_search_topk() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.jsonl");
        let (corpus, _) = ingest(path, CorpusFormat::JsonLines).unwrap();
        let corpus = Arc::new(corpus);
        let index = Arc::new(build_index(&corpus).unwrap());
        let backend = LocalBackend::new(corpus.clone(), index.clone());

        let via_backend = backend.search("textbook|policy", 10).unwrap();
        let ast = parse_query("textbook|policy").unwrap();
        let direct = search_topk(&ast, &index, &corpus, 10);
        assert_eq!(
            via_backend.iter().map(|d| &d.id).collect::<Vec<_>>(),
            direct.iter().map(|h| &h.doc.id).collect::<Vec<_>>()
        );
    }

    /// One-shot HTTP server that answers `responses[i]` to the i-th request
    /// and then stops. Good enough for contract tests.
    fn serve_canned(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = [0u8; 4096];
                let n = stream.read(&mut buf).unwrap();
                let request = String::from_utf8_lossy(&buf[..n]).to_string();
                seen.push(request.lines().next().unwrap_or("").to_string());
                let reason = if status == 200 { "OK" } else { "ERR" };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(response.as_bytes()).unwrap();
            }
            seen
        });
        (format!("http://{addr}/search"), handle)
    }

    #[test]
    fn remote_backend_parses_canned_documents() {
        let body = r#"[
            {"id":"r1","title":"t1","abstract":"a1","body":"","lang":"en","source":"remote"},
            {"id":"r2","title":"t2","abstract":"a2","body":"","lang":"en","source":"remote"},
            {"id":"r3","title":"t3","abstract":"a3","body":"","lang":"ko","source":"remote"}
        ]"#;
        let (url, handle) = serve_canned(vec![(200, body.to_string())]);
        let backend = RemoteBackend::new(url, 2000, 0);
        let docs = backend.search("a|b", 10).unwrap();
        assert_eq!(docs.len(), 3);
        assert_eq!(docs[0].id, "r1");
        let requests = handle.join().unwrap();
        assert!(requests[0].contains("q=a%7Cb"), "request line: {}", requests[0]);
        assert!(requests[0].contains("topk=10"));
    }

    #[test]
    fn remote_5xx_retries_then_errors() {
        let (url, handle) = serve_canned(vec![
            (500, "oops".to_string()),
            (500, "oops".to_string()),
        ]);
        let backend = RemoteBackend::new(url, 2000, 1);
        let err = backend.search("a", 5).unwrap_err();
        match err {
            Error::Backend { query, retriable, .. } => {
                assert_eq!(query, "a");
                assert!(retriable);
            }
            other => panic!("expected backend error, got {other:?}"),
        }
        assert_eq!(handle.join().unwrap().len(), 2);
    }

    #[test]
    fn remote_retry_succeeds_after_transient_failure() {
        let body = r#"[{"id":"r1","title":"t","abstract":"a","body":"","lang":"en"}]"#;
        let (url, handle) = serve_canned(vec![(503, "busy".to_string()), (200, body.to_string())]);
        let backend = RemoteBackend::new(url, 2000, 2);
        let docs = backend.search("a", 5).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(handle.join().unwrap().len(), 2);
    }
}
