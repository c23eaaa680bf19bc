//! Structured answer generation: prompt assembly over the top documents,
//! provider invocation, parsing of the (Title, Introduction, Main Body)
//! triple, and optional query decomposition.

use serde::{Deserialize, Serialize};

use crate::engine::index::ScoredDocument;
use crate::error::{Error, Result};

/// The answer triple plus the document ids actually cited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredAnswer {
    pub title: String,
    pub introduction: String,
    pub main_body: String,
    /// Ids of the provided documents that the answer cites as [n].
    pub citations: Vec<String>,
}

/// The lines that delimit the three answer sections in generated text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionMarkers {
    pub title: String,
    pub introduction: String,
    pub main_body: String,
}

impl Default for SectionMarkers {
    fn default() -> Self {
        Self {
            title: "## Title".to_string(),
            introduction: "## Introduction".to_string(),
            main_body: "## Main Body".to_string(),
        }
    }
}

/// A prompt template: body text with {{query}}, {{documents}}, and
/// {{lang}} placeholders, plus the section markers the rendered prompt
/// instructs the model to emit. Markers live on the template so that
/// per-language templates can carry their own output format.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    pub markers: SectionMarkers,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            body: body.into(),
            markers: SectionMarkers::default(),
        }
    }

    pub fn with_markers(mut self, markers: SectionMarkers) -> Self {
        self.markers = markers;
        self
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(Self::new(path.display().to_string(), body))
    }

    /// The bundled answer template for a primary language tag; languages
    /// without a dedicated template fall back to English.
    pub fn bundled_answer(lang: &str) -> Self {
        match lang {
            "ko" => Self::new("answer_ko", include_str!("../templates/answer_ko.txt")),
            _ => Self::new("answer_en", include_str!("../templates/answer_en.txt")),
        }
    }

    pub fn bundled_decompose(lang: &str) -> Self {
        match lang {
            "ko" => Self::new("decompose_ko", include_str!("../templates/decompose_ko.txt")),
            _ => Self::new("decompose_en", include_str!("../templates/decompose_en.txt")),
        }
    }
}

/// Plain text-in, text-out generation. HTTP LLM endpoints and the offline
/// deterministic generator both implement this.
pub trait GenerationProvider: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<String>;
}

/// One numbered document block: "[n] id | title" on the first line, the
/// abstract on the following lines.
fn render_block(rank: usize, doc: &ScoredDocument) -> String {
    format!(
        "[{}] {} | {}\n{}",
        rank, doc.doc.id, doc.doc.title, doc.doc.abstract_text
    )
}

fn render(template: &PromptTemplate, query: &str, lang: &str, documents: &str) -> Result<String> {
    if !template.body.contains("{{documents}}") {
        return Err(Error::Template(format!(
            "template {} is missing the {{{{documents}}}} placeholder",
            template.name
        )));
    }
    let rendered = template
        .body
        .replace("{{query}}", query)
        .replace("{{documents}}", documents)
        .replace("{{lang}}", lang);
    for placeholder in ["{{query}}", "{{documents}}", "{{lang}}"] {
        if rendered.contains(placeholder) {
            return Err(Error::Template(format!(
                "placeholder {placeholder} still unbound after render"
            )));
        }
    }
    Ok(rendered)
}

/// Assemble the generation prompt: documents serialized in rank order as
/// numbered blocks, all placeholders bound, total length capped at
/// `char_budget` characters by truncating the lowest-ranked document
/// blocks first.
pub fn assemble_prompt(
    query: &str,
    lang: &str,
    docs: &[ScoredDocument],
    template: &PromptTemplate,
    char_budget: usize,
) -> Result<String> {
    if docs.is_empty() {
        return Err(Error::EmptyDocumentSet);
    }
    let mut blocks: Vec<String> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| render_block(i + 1, d))
        .collect();

    let rendered = render(template, query, lang, &blocks.join("\n\n"))?;
    let total = rendered.chars().count();
    if total <= char_budget {
        return Ok(rendered);
    }

    // Over budget: shrink blocks from the lowest rank upward, keeping the
    // "[n] " prefix of each block so citation numbering stays intact.
    let mut excess = total - char_budget;
    for block in blocks.iter_mut().rev() {
        if excess == 0 {
            break;
        }
        let len = block.chars().count();
        let floor = block.chars().take_while(|&c| c != ' ').count() + 1; // "[n]" plus a space
        let reducible = len.saturating_sub(floor);
        let cut = reducible.min(excess);
        if cut > 0 {
            *block = block.chars().take(len - cut).collect();
            excess -= cut;
        }
    }
    if excess > 0 {
        return Err(Error::PromptBudget {
            budget: char_budget,
            needed: excess + char_budget,
        });
    }
    render(template, query, lang, &blocks.join("\n\n"))
}

/// Extract the three sections delimited by the template's marker lines
/// and map [n] citations back to document ids through `numbering` (the
/// ids of the prompt's documents in rank order). Fails naming the first
/// missing or empty section.
pub fn parse_structured(
    raw: &str,
    markers: &SectionMarkers,
    numbering: &[String],
) -> Result<StructuredAnswer> {
    let title = section_after(raw, &markers.title, &[&markers.introduction, &markers.main_body])
        .ok_or_else(|| Error::AnswerParse {
            section: "Title".to_string(),
        })?;
    let introduction = section_after(raw, &markers.introduction, &[&markers.title, &markers.main_body])
        .ok_or_else(|| Error::AnswerParse {
            section: "Introduction".to_string(),
        })?;
    let main_body = section_after(raw, &markers.main_body, &[&markers.title, &markers.introduction])
        .ok_or_else(|| Error::AnswerParse {
            section: "Main Body".to_string(),
        })?;

    let mut cited: Vec<usize> = Vec::new();
    for section in [&title, &introduction, &main_body] {
        collect_citation_indices(section, numbering.len(), &mut cited);
    }
    cited.sort_unstable();
    cited.dedup();

    Ok(StructuredAnswer {
        title,
        introduction,
        main_body,
        citations: cited.into_iter().map(|n| numbering[n - 1].clone()).collect(),
    })
}

/// Content between a marker line and the next marker (or end of text),
/// trimmed; None when the marker is absent or the content is empty.
fn section_after(raw: &str, marker: &str, other_markers: &[&str]) -> Option<String> {
    let mut lines = raw.lines();
    let mut content = String::new();
    let mut found = false;
    while let Some(line) = lines.next() {
        if line.trim() == marker {
            found = true;
            for line in lines.by_ref() {
                if other_markers.iter().any(|m| line.trim() == *m) {
                    break;
                }
                content.push_str(line);
                content.push('\n');
            }
            break;
        }
    }
    if !found {
        return None;
    }
    let content = content.trim().to_string();
    if content.is_empty() {
        None
    } else {
        Some(content)
    }
}

/// Scan for [n] with 1 <= n <= max; out-of-range ns are not citations.
fn collect_citation_indices(text: &str, max: usize, out: &mut Vec<usize>) {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'[' {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b']' {
                if let Ok(n) = text[i + 1..j].parse::<usize>() {
                    if n >= 1 && n <= max {
                        out.push(n);
                    }
                }
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
}

/// Split a query into ordered sub-queries through a generation provider.
/// Provider failures fall back to the identity split with a warning flag.
pub struct DecomposeOutcome {
    pub sub_queries: Vec<String>,
    pub fell_back: bool,
}

pub fn decompose_query(
    query: &str,
    lang: &str,
    provider: &dyn GenerationProvider,
) -> DecomposeOutcome {
    let template = PromptTemplate::bundled_decompose(lang);
    let prompt = template
        .body
        .replace("{{query}}", query)
        .replace("{{lang}}", lang);
    match provider.generate(&prompt) {
        Ok(text) => {
            let subs = parse_sub_queries(&text);
            if subs.is_empty() {
                DecomposeOutcome {
                    sub_queries: vec![query.to_string()],
                    fell_back: true,
                }
            } else {
                DecomposeOutcome {
                    sub_queries: subs,
                    fell_back: false,
                }
            }
        }
        Err(_) => DecomposeOutcome {
            sub_queries: vec![query.to_string()],
            fell_back: true,
        },
    }
}

fn parse_sub_queries(text: &str) -> Vec<String> {
    if let Ok(list) = serde_json::from_str::<Vec<String>>(text.trim()) {
        return list.into_iter().filter(|s| !s.trim().is_empty()).collect();
    }
    text.lines()
        .map(|l| {
            l.trim()
                .trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c == ')' || c == '-')
                .trim()
                .to_string()
        })
        .filter(|l| !l.is_empty())
        .collect()
}

/// The identity decomposer: single-hop assumption, query passes through.
pub fn passthrough_decompose(query: &str) -> Vec<String> {
    vec![query.to_string()]
}

/// Generation endpoint over HTTP: POST {"prompt": ..., "max_tokens": n},
/// response {"text": ...}. An API key, when present in the environment
/// as SHRAG_API_KEY, goes out as a bearer token.
pub struct HttpGenerator {
    endpoint: String,
    max_tokens: usize,
    agent: ureq::Agent,
}

impl HttpGenerator {
    pub fn new(endpoint: impl Into<String>, timeout_ms: u64, max_tokens: usize) -> Self {
        let config = ureq::config::Config::builder()
            .timeout_global(Some(std::time::Duration::from_millis(timeout_ms)))
            .build();
        Self {
            endpoint: endpoint.into(),
            max_tokens,
            agent: ureq::Agent::new_with_config(config),
        }
    }
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

impl GenerationProvider for HttpGenerator {
    fn generate(&self, prompt: &str) -> Result<String> {
        let payload = serde_json::json!({ "prompt": prompt, "max_tokens": self.max_tokens });
        let mut request = self.agent.post(&self.endpoint);
        if let Ok(key) = std::env::var("SHRAG_API_KEY") {
            request = request.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(&payload).map_err(|e| Error::Provider {
            provider: "generator".to_string(),
            message: e.to_string(),
        })?;
        let parsed: GenerateResponse =
            response
                .body_mut()
                .read_json()
                .map_err(|e| Error::Provider {
                    provider: "generator".to_string(),
                    message: e.to_string(),
                })?;
        Ok(parsed.text)
    }
}

/// Deterministic offline generator. It reads the question and the
/// numbered document blocks back out of the prompt (the conventions of
/// [`assemble_prompt`] and the bundled templates) and emits a well-formed
/// answer: the query as the title, the lead of the top document as the
/// introduction, and one cited sentence per document as the main body.
#[derive(Debug, Default)]
pub struct TemplateGenerator;

struct PromptView {
    query: String,
    blocks: Vec<(usize, String)>,
}

fn read_prompt(prompt: &str) -> PromptView {
    let mut query = String::new();
    let mut blocks: Vec<(usize, String)> = Vec::new();
    for line in prompt.lines() {
        let trimmed = line.trim();
        for label in ["Question:", "질문:"] {
            if let Some(rest) = trimmed.strip_prefix(label) {
                if !rest.trim().is_empty() {
                    query = rest.trim().to_string();
                }
            }
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            if let Some(close) = rest.find(']') {
                if let Ok(n) = rest[..close].parse::<usize>() {
                    blocks.push((n, rest[close + 1..].trim().to_string()));
                    continue;
                }
            }
        }
        // Continuation lines (abstract text) attach to the open block.
        if let Some((_, content)) = blocks.last_mut() {
            if !trimmed.is_empty() {
                content.push(' ');
                content.push_str(trimmed);
            }
        }
    }
    PromptView { query, blocks }
}

/// First sentence of a block's text (after the "id | title" header line
/// was folded in), or a bounded prefix when no sentence break exists.
fn lead_sentence(text: &str) -> String {
    let body = match text.split_once('|') {
        Some((_, rest)) => rest.trim(),
        None => text.trim(),
    };
    for (i, c) in body.char_indices() {
        if matches!(c, '.' | '!' | '?') {
            return body[..i + c.len_utf8()].to_string();
        }
    }
    body.chars().take(200).collect()
}

impl GenerationProvider for TemplateGenerator {
    fn generate(&self, prompt: &str) -> Result<String> {
        let view = read_prompt(prompt);
        let title = if view.query.is_empty() {
            "Answer".to_string()
        } else {
            view.query.clone()
        };
        let introduction = view
            .blocks
            .first()
            .map(|(_, text)| lead_sentence(text))
            .unwrap_or_else(|| "No supporting documents were provided.".to_string());
        let mut body = String::new();
        for (n, text) in &view.blocks {
            body.push_str(&format!("{} [{}]\n", lead_sentence(text), n));
        }
        if body.is_empty() {
            body = "No supporting documents were provided. [0]".to_string();
        }
        Ok(format!(
            "## Title\n{title}\n\n## Introduction\n{introduction}\n\n## Main Body\n{body}"
        ))
    }
}
