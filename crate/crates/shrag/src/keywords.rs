//! Per-language keyword extraction, compound splitting, and importance
//! ranking with the hard top-10 cap.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::document::Corpus;
use crate::engine::tokenize::tokenize;
use crate::error::{Error, Result};

/// Hard cap on the ranked keyword set.
pub const MAX_KEYWORDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    /// The keyword text. Single word (no whitespace) after compound
    /// splitting; case-folded once ranked into a `KeywordSet`.
    pub surface: String,
    pub lang: String,
    /// Non-negative; only the ordering matters across one extraction.
    pub importance: f64,
}

impl Keyword {
    pub fn new(surface: impl Into<String>, lang: impl Into<String>, importance: f64) -> Self {
        Self {
            surface: surface.into(),
            lang: lang.into(),
            importance,
        }
    }
}

/// Ranked, deduplicated, single-word keywords; at most [`MAX_KEYWORDS`],
/// descending importance. Build one with [`rank_and_truncate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordSet {
    keywords: Vec<Keyword>,
}

impl KeywordSet {
    pub fn keywords(&self) -> &[Keyword] {
        &self.keywords
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.keywords.iter().map(|k| k.surface.as_str()).collect()
    }
}

/// Something that can propose up to `k` keywords for a query in a given
/// language: an LLM over HTTP, or the offline statistical scorer.
pub trait ExtractorProvider: Send + Sync {
    fn extract(&self, query: &str, lang: &str, k: usize) -> Result<Vec<Keyword>>;
}

/// Run the provider once for English and once for the target language,
/// min-max normalizing each call's importances to [0, 1] so the two lists
/// rank jointly on a shared scale. Returns (english, target) lists.
pub fn extract_bilingual(
    query: &str,
    target_lang: &str,
    k: usize,
    provider: &dyn ExtractorProvider,
) -> Result<(Vec<Keyword>, Vec<Keyword>)> {
    if query.trim().is_empty() {
        return Err(Error::Usage("empty query".to_string()));
    }
    if k == 0 {
        return Err(Error::Usage("k must be >= 1".to_string()));
    }
    let mut en = provider.extract(query, "en", k)?;
    let mut target = provider.extract(query, target_lang, k)?;
    en.truncate(k);
    target.truncate(k);
    normalize_importance(&mut en);
    normalize_importance(&mut target);
    Ok((en, target))
}

/// Min-max to [0, 1]; a constant list maps to all ones.
fn normalize_importance(keywords: &mut [Keyword]) {
    let Some(max) = keywords.iter().map(|k| k.importance).reduce(f64::max) else {
        return;
    };
    let min = keywords.iter().map(|k| k.importance).fold(max, f64::min);
    let range = max - min;
    for k in keywords.iter_mut() {
        k.importance = if range > 0.0 { (k.importance - min) / range } else { 1.0 };
    }
}

/// Split multi-word surfaces on whitespace. Each part inherits the
/// parent's language and importance and expands in place.
pub fn split_compounds(keywords: Vec<Keyword>) -> Vec<Keyword> {
    let mut out = Vec::with_capacity(keywords.len());
    for kw in keywords {
        let parts: Vec<&str> = kw.surface.split_whitespace().collect();
        match parts.len() {
            0 => {}
            1 => {
                if parts[0] == kw.surface {
                    out.push(kw);
                } else {
                    out.push(Keyword::new(parts[0], kw.lang.clone(), kw.importance));
                }
            }
            _ => {
                for part in parts {
                    out.push(Keyword::new(part, kw.lang.clone(), kw.importance));
                }
            }
        }
    }
    out
}

/// Case-folded dedup (keeping each surface's maximum importance), sort by
/// (importance desc, first-seen asc, surface asc), cap at
/// [`MAX_KEYWORDS`]. Surfaces in the result are case-folded.
pub fn rank_and_truncate(keywords: Vec<Keyword>) -> Result<KeywordSet> {
    let mut order: Vec<String> = Vec::new();
    let mut best: HashMap<String, (usize, Keyword)> = HashMap::new();

    for kw in keywords {
        let folded = kw.surface.to_lowercase();
        if folded.is_empty() {
            continue;
        }
        match best.get_mut(&folded) {
            None => {
                let first_seen = order.len();
                order.push(folded.clone());
                let mut kept = kw;
                kept.surface = folded.clone();
                best.insert(folded, (first_seen, kept));
            }
            Some((_, kept)) => {
                if kw.importance > kept.importance {
                    kept.importance = kw.importance;
                    kept.lang = kw.lang;
                }
            }
        }
    }

    if order.is_empty() {
        return Err(Error::NoKeywords);
    }

    let mut ranked: Vec<(usize, Keyword)> = order
        .iter()
        .map(|surface| best.remove(surface).expect("tracked surface"))
        .collect();
    ranked.sort_by(|a, b| {
        b.1.importance
            .total_cmp(&a.1.importance)
            .then_with(|| a.0.cmp(&b.0))
            .then_with(|| a.1.surface.cmp(&b.1.surface))
    });
    ranked.truncate(MAX_KEYWORDS);
    Ok(KeywordSet {
        keywords: ranked.into_iter().map(|(_, k)| k).collect(),
    })
}

/// Offline extractor: scores each query token by TF-IDF against a corpus.
/// tf counts occurrences within the query; idf = ln((N+1)/(df+1)) + 1.
/// Deterministic, no network, used as the test-time provider and as the
/// fallback when an LLM endpoint is down.
pub struct StatisticalExtractor {
    doc_count: usize,
    document_frequency: HashMap<String, usize>,
}

impl StatisticalExtractor {
    pub fn new(corpus: &Corpus) -> Self {
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in corpus.documents() {
            let mut seen: Vec<String> = tokenize(&doc.index_text(), &doc.lang);
            seen.sort();
            seen.dedup();
            for token in seen {
                *df.entry(token).or_insert(0) += 1;
            }
        }
        Self {
            doc_count: corpus.len(),
            document_frequency: df,
        }
    }

    fn idf(&self, token: &str) -> f64 {
        let df = self.document_frequency.get(token).copied().unwrap_or(0);
        ((self.doc_count as f64 + 1.0) / (df as f64 + 1.0)).ln() + 1.0
    }
}

impl ExtractorProvider for StatisticalExtractor {
    fn extract(&self, query: &str, lang: &str, k: usize) -> Result<Vec<Keyword>> {
        let tokens = tokenize(query, lang);
        let mut tf: HashMap<&str, usize> = HashMap::new();
        let mut first_seen: Vec<&str> = Vec::new();
        for token in &tokens {
            if !tf.contains_key(token.as_str()) {
                first_seen.push(token);
            }
            *tf.entry(token).or_insert(0) += 1;
        }
        let mut scored: Vec<(usize, Keyword)> = first_seen
            .iter()
            .enumerate()
            .map(|(pos, &token)| {
                let score = tf[token] as f64 * self.idf(token);
                (pos, Keyword::new(token, lang, score))
            })
            .collect();
        scored.sort_by(|a, b| b.1.importance.total_cmp(&a.1.importance).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored.into_iter().map(|(_, k)| k).collect())
    }
}

/// Extractor backed by a generation endpoint: renders the per-language
/// prompt template and parses the response as a JSON array of
/// {keyword, importance} objects (directly, or wrapped in {"text": ...}).
pub struct HttpExtractor {
    endpoint: String,
    templates: HashMap<String, String>,
    fallback_template: String,
    max_tokens: usize,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct KeywordRow {
    keyword: String,
    #[serde(default)]
    importance: f64,
}

impl HttpExtractor {
    pub fn new(endpoint: impl Into<String>, timeout_ms: u64, max_tokens: usize) -> Self {
        let config = ureq::config::Config::builder()
            .timeout_global(Some(std::time::Duration::from_millis(timeout_ms)))
            .build();
        Self {
            endpoint: endpoint.into(),
            templates: HashMap::new(),
            fallback_template: include_str!("../templates/extract_en.txt").to_string(),
            max_tokens,
            agent: ureq::Agent::new_with_config(config),
        }
    }

    /// Register the prompt template for one language. The bundled
    /// templates for "en" and "ko" are pre-registered by default config.
    pub fn with_template(mut self, lang: impl Into<String>, body: impl Into<String>) -> Self {
        self.templates.insert(lang.into(), body.into());
        self
    }

    pub fn with_bundled_templates(self) -> Self {
        self.with_template("en", include_str!("../templates/extract_en.txt"))
            .with_template("ko", include_str!("../templates/extract_ko.txt"))
    }

    fn render(&self, query: &str, lang: &str, k: usize) -> String {
        let template = self
            .templates
            .get(lang)
            .unwrap_or(&self.fallback_template);
        template
            .replace("{{query}}", query)
            .replace("{{k}}", &k.to_string())
    }

    fn parse_rows(body: &str) -> Option<Vec<KeywordRow>> {
        if let Ok(rows) = serde_json::from_str::<Vec<KeywordRow>>(body) {
            return Some(rows);
        }
        #[derive(Deserialize)]
        struct Wrapped {
            text: String,
        }
        let wrapped: Wrapped = serde_json::from_str(body).ok()?;
        serde_json::from_str(&wrapped.text).ok()
    }
}

impl ExtractorProvider for HttpExtractor {
    fn extract(&self, query: &str, lang: &str, k: usize) -> Result<Vec<Keyword>> {
        let prompt = self.render(query, lang, k);
        let payload = serde_json::json!({ "prompt": prompt, "max_tokens": self.max_tokens });
        let mut request = self.agent.post(&self.endpoint);
        if let Ok(key) = std::env::var("SHRAG_API_KEY") {
            request = request.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(&payload)
            .map_err(|e| Error::Provider {
                provider: "extractor".to_string(),
                message: e.to_string(),
            })?;
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Provider {
                provider: "extractor".to_string(),
                message: e.to_string(),
            })?;
        let rows = Self::parse_rows(&body).ok_or_else(|| Error::Provider {
            provider: "extractor".to_string(),
            message: "response is not a keyword array".to_string(),
        })?;
        Ok(rows
            .into_iter()
            .take(k)
            .map(|r| Keyword::new(r.keyword, lang, r.importance.max(0.0)))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::Document;

    struct FixtureProvider;

    impl ExtractorProvider for FixtureProvider {
        fn extract(&self, _query: &str, lang: &str, k: usize) -> Result<Vec<Keyword>> {
            let fixture = match lang {
                "en" => vec![
                    Keyword::new("free textbook", "en", 0.9),
                    Keyword::new("school", "en", 0.7),
                ],
                _ => vec![
                    Keyword::new("무상", lang, 0.8),
                    Keyword::new("교과서", lang, 0.6),
                ],
            };
            Ok(fixture.into_iter().take(k).collect())
        }
    }

    fn hand_corpus() -> Corpus {
        let docs = vec![
            ("h1", "free textbook program"),
            ("h2", "textbook review"),
            ("h3", "solar power"),
        ];
        let (c, _) = Corpus::from_documents(docs.into_iter().map(|(id, body)| Document {
            id: id.to_string(),
            title: String::new(),
            abstract_text: String::new(),
            body: body.to_string(),
            lang: "en".to_string(),
            source: "local".to_string(),
        }));
        c
    }

    #[test]
    fn bilingual_extraction_echoes_fixture_lists() {
        let (en, ko) = extract_bilingual("무상 교과서", "ko", 5, &FixtureProvider).unwrap();
        assert_eq!(en.len(), 2);
        assert_eq!(en[0].surface, "free textbook");
        assert_eq!(ko.len(), 2);
        assert_eq!(ko[0].surface, "무상");
        // per-call min-max normalization
        assert_eq!(en[0].importance, 1.0);
        assert_eq!(en[1].importance, 0.0);
    }

    #[test]
    fn compound_example_reaches_en_list() {
        let (en, _) = extract_bilingual("free textbooks in schools", "ko", 5, &FixtureProvider).unwrap();
        assert!(en.iter().any(|k| k.surface == "free textbook"));
    }

    #[test]
    fn split_compounds_splits_and_inherits() {
        let split = split_compounds(vec![Keyword::new("free textbook", "en", 0.9)]);
        assert_eq!(split.len(), 2);
        assert_eq!(split[0].surface, "free");
        assert_eq!(split[1].surface, "textbook");
        assert_eq!(split[0].importance, 0.9);
        assert_eq!(split[1].lang, "en");
    }

    #[test]
    fn split_compounds_identity_on_single_words() {
        let split = split_compounds(vec![Keyword::new("school", "en", 0.5)]);
        assert_eq!(split, vec![Keyword::new("school", "en", 0.5)]);
    }

    #[test]
    fn split_compounds_three_parts_same_importance() {
        let split = split_compounds(vec![Keyword::new("a b c", "en", 0.9)]);
        assert_eq!(split.len(), 3);
        assert!(split.iter().all(|k| k.importance == 0.9));
    }

    #[test]
    fn rank_keeps_first_ten_by_importance() {
        let kws: Vec<Keyword> = (0..12)
            .map(|i| Keyword::new(format!("k{i:02}"), "en", 1.0 - i as f64 / 100.0))
            .collect();
        let set = rank_and_truncate(kws).unwrap();
        assert_eq!(set.len(), 10);
        assert_eq!(set.keywords()[0].surface, "k00");
        assert_eq!(set.keywords()[9].surface, "k09");
    }

    #[test]
    fn rank_case_folds_and_keeps_max_importance() {
        let set = rank_and_truncate(vec![
            Keyword::new("Free", "en", 0.3),
            Keyword::new("free", "en", 0.8),
        ])
        .unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.keywords()[0].surface, "free");
        assert_eq!(set.keywords()[0].importance, 0.8);
    }

    #[test]
    fn rank_ties_keep_first_seen_order() {
        let set = rank_and_truncate(vec![
            Keyword::new("zeta", "en", 0.5),
            Keyword::new("alpha", "en", 0.5),
            Keyword::new("mid", "en", 0.5),
        ])
        .unwrap();
        assert_eq!(set.surfaces(), ["zeta", "alpha", "mid"]);
    }

    #[test]
    fn rank_empty_input_errors() {
        assert!(matches!(rank_and_truncate(vec![]), Err(Error::NoKeywords)));
    }

    #[test]
    fn rank_is_idempotent() {
        let set = rank_and_truncate(vec![
            Keyword::new("b", "en", 0.4),
            Keyword::new("a", "en", 0.9),
        ])
        .unwrap();
        let again = rank_and_truncate(set.keywords().to_vec()).unwrap();
        assert_eq!(set, again);
    }

    #[test]
    fn statistical_scores_match_hand_tfidf() {
        // Hand oracle on the 3-doc corpus: df(free)=1, df(textbook)=2, N=3.
        // idf(free)     = ln(4/2) + 1 = 1.6931471805599454
        // idf(textbook) = ln(4/3) + 1 = 1.2876820724517808
        let extractor = StatisticalExtractor::new(&hand_corpus());
        let kws = extractor.extract("free textbook", "en", 10).unwrap();
        assert_eq!(kws.len(), 2);
        assert_eq!(kws[0].surface, "free");
        assert!((kws[0].importance - 1.6931471805599454).abs() < 1e-12);
        assert_eq!(kws[1].surface, "textbook");
        assert!((kws[1].importance - 1.2876820724517808).abs() < 1e-12);
    }

    #[test]
    fn statistical_unknown_token_uses_df_zero() {
        let extractor = StatisticalExtractor::new(&hand_corpus());
        let kws = extractor.extract("nonexistent", "en", 10).unwrap();
        // idf = ln((3+1)/(0+1)) + 1 = ln(4) + 1
        assert!((kws[0].importance - (4.0f64.ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn statistical_returns_all_tokens_when_k_is_large() {
        let extractor = StatisticalExtractor::new(&hand_corpus());
        let kws = extractor.extract("free textbook", "en", 99).unwrap();
        assert_eq!(kws.len(), 2);
    }

    #[test]
    fn statistical_counts_query_tf() {
        let extractor = StatisticalExtractor::new(&hand_corpus());
        let kws = extractor.extract("textbook textbook free", "en", 10).unwrap();
        // tf(textbook)=2 lifts it above free despite the lower idf:
        // 2*1.28768... = 2.57536... > 1.69314...
        assert_eq!(kws[0].surface, "textbook");
    }
}
