//! Contract tests for the HTTP provider implementations against canned
//! local servers: request shapes out, response parsing in.

use std::io::{Read, Write};
use std::net::TcpListener;

use shrag::answer::{GenerationProvider, HttpGenerator};
use shrag::keywords::{ExtractorProvider, HttpExtractor};
use shrag::rerank::{EmbeddingProvider, RemoteEmbedder};

/// Answer each request with the next canned body, then return the raw
/// requests that were seen.
fn serve_canned(responses: Vec<String>) -> (String, std::thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        let mut seen = Vec::new();
        for body in responses {
            let (mut stream, _) = listener.accept().unwrap();
            seen.push(read_request(&mut stream));
            let response = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                body.len(),
                body
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
        seen
    });
    (format!("http://{addr}/v1"), handle)
}

/// Read headers plus a content-length body (requests here are small and
/// never chunked).
fn read_request(stream: &mut std::net::TcpStream) -> String {
    let mut data = Vec::new();
    let mut buf = [0u8; 4096];
    let header_end = loop {
        let n = stream.read(&mut buf).unwrap();
        assert!(n > 0, "connection closed mid-request");
        data.extend_from_slice(&buf[..n]);
        if let Some(pos) = data.windows(4).position(|w| w == b"\r\n\r\n") {
            break pos + 4;
        }
    };
    let headers = String::from_utf8_lossy(&data[..header_end]).to_lowercase();
    let content_length: usize = headers
        .lines()
        .find_map(|l| l.strip_prefix("content-length:"))
        .map(|v| v.trim().parse().unwrap())
        .unwrap_or(0);
    while data.len() < header_end + content_length {
        let n = stream.read(&mut buf).unwrap();
        assert!(n > 0, "connection closed mid-body");
        data.extend_from_slice(&buf[..n]);
    }
    String::from_utf8_lossy(&data).to_string()
}

#[test]
fn http_extractor_renders_template_and_parses_array() {
    let body = r#"[
        {"keyword": "free textbook", "importance": 0.9},
        {"keyword": "school", "importance": 0.4}
    ]"#;
    let (url, handle) = serve_canned(vec![body.to_string()]);
    let extractor = HttpExtractor::new(url, 2000, 256).with_bundled_templates();
    let keywords = extractor.extract("free textbooks at school", "en", 5).unwrap();
    assert_eq!(keywords.len(), 2);
    assert_eq!(keywords[0].surface, "free textbook");
    assert_eq!(keywords[0].lang, "en");
    assert_eq!(keywords[0].importance, 0.9);

    let requests = handle.join().unwrap();
    assert!(requests[0].starts_with("POST /v1"));
    // The rendered prompt carries the query and the k placeholder value.
    assert!(requests[0].contains("free textbooks at school"));
    assert!(requests[0].contains('5'));
}

#[test]
fn http_extractor_accepts_wrapped_text_response() {
    let body = r#"{"text": "[{\"keyword\": \"solar\", \"importance\": 1.0}]"}"#;
    let (url, handle) = serve_canned(vec![body.to_string()]);
    let extractor = HttpExtractor::new(url, 2000, 256).with_bundled_templates();
    let keywords = extractor.extract("solar", "en", 3).unwrap();
    assert_eq!(keywords.len(), 1);
    assert_eq!(keywords[0].surface, "solar");
    handle.join().unwrap();
}

#[test]
fn http_extractor_caps_at_k_and_clamps_importance() {
    let body = r#"[
        {"keyword": "a", "importance": -3.0},
        {"keyword": "b", "importance": 2.0},
        {"keyword": "c", "importance": 1.0}
    ]"#;
    let (url, handle) = serve_canned(vec![body.to_string()]);
    let extractor = HttpExtractor::new(url, 2000, 256).with_bundled_templates();
    let keywords = extractor.extract("q", "ko", 2).unwrap();
    assert_eq!(keywords.len(), 2);
    assert_eq!(keywords[0].importance, 0.0, "negative importance clamps to 0");
    assert!(keywords.iter().all(|k| k.lang == "ko"));
    handle.join().unwrap();
}

#[test]
fn http_generator_posts_prompt_and_reads_text() {
    let body = r###"{"text": "## Title\nT\n\n## Introduction\nI\n\n## Main Body\nB [1]"}"###;
    let (url, handle) = serve_canned(vec![body.to_string()]);
    let generator = HttpGenerator::new(url, 2000, 512);
    let text = generator.generate("the prompt").unwrap();
    assert!(text.starts_with("## Title"));

    let requests = handle.join().unwrap();
    assert!(requests[0].contains(r#""prompt": "the prompt""#));
    assert!(requests[0].contains(r#""max_tokens": 512"#));
}

#[test]
fn http_generator_sends_api_key_when_set() {
    // Serialize access to the process environment with a lock held for
    // the whole test.
    let body = r#"{"text": "ok"}"#;
    let (url, handle) = serve_canned(vec![body.to_string()]);
    std::env::set_var("SHRAG_API_KEY", "sk-test-123");
    let generator = HttpGenerator::new(url, 2000, 16);
    generator.generate("p").unwrap();
    std::env::remove_var("SHRAG_API_KEY");

    let requests = handle.join().unwrap();
    assert!(
        requests[0].to_lowercase().contains("authorization: bearer sk-test-123"),
        "request: {}",
        requests[0]
    );
}

#[test]
fn remote_embedder_posts_texts_and_reads_vectors() {
    let body = r#"{"vectors": [[0.6, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]], "dim": 8}"#;
    let (url, handle) = serve_canned(vec![body.to_string()]);
    let embedder = RemoteEmbedder::new(url, 8, 2000);
    let vector = embedder.embed("무상 교과서").unwrap();
    assert_eq!(vector.dim(), 8);
    assert_eq!(vector.values()[0], 0.6);

    let requests = handle.join().unwrap();
    assert!(requests[0].contains(r#""texts""#));
    assert_eq!(embedder.dim(), 8);
}

#[test]
fn remote_embedder_rejects_zero_vector_response() {
    let body = r#"{"vectors": [[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]], "dim": 8}"#;
    let (url, handle) = serve_canned(vec![body.to_string()]);
    let embedder = RemoteEmbedder::new(url, 8, 2000);
    assert!(embedder.embed("text").is_err());
    handle.join().unwrap();
}

