//! Tokenization for indexing and query-side keyword scoring.
//!
//! Segmentation is script-driven and identical for every language tag:
//! text splits on anything that is not alphanumeric, and within an
//! alphanumeric run, Hangul and non-Hangul characters separate into
//! distinct tokens. No stemming, no morphological analysis. Tokens are
//! lowercased.

/// Hangul syllables plus the jamo blocks.
fn is_hangul(c: char) -> bool {
    matches!(c,
        '\u{AC00}'..='\u{D7AF}'
        | '\u{1100}'..='\u{11FF}'
        | '\u{3130}'..='\u{318F}'
        | '\u{A960}'..='\u{A97F}'
        | '\u{D7B0}'..='\u{D7FF}')
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Tokenize `text`. The language tag is accepted for interface symmetry;
/// segmentation itself keys off the script of each character, so mixed-
/// script text behaves the same regardless of the tag.
pub fn tokenize(text: &str, _lang: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut current_hangul = false;

    for c in text.chars() {
        if !is_token_char(c) {
            flush(&mut tokens, &mut current);
            continue;
        }
        let hangul = is_hangul(c);
        if !current.is_empty() && hangul != current_hangul {
            flush(&mut tokens, &mut current);
        }
        current_hangul = hangul;
        for lc in c.to_lowercase() {
            current.push(lc);
        }
    }
    flush(&mut tokens, &mut current);
    tokens
}

fn flush(tokens: &mut Vec<String>, current: &mut String) {
    if !current.is_empty() {
        tokens.push(std::mem::take(current));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_splits_punctuation() {
        assert_eq!(tokenize("Free Textbook!", "en"), ["free", "textbook"]);
    }

    #[test]
    fn empty_text_yields_no_tokens() {
        assert_eq!(tokenize("", "en"), Vec::<String>::new());
        assert_eq!(tokenize("  ,,  ", "ko"), Vec::<String>::new());
    }

    #[test]
    fn hangul_whitespace_split_matches_oracle() {
        // Oracle: plain whitespace split of the same string.
        let text = "무상 교과서 제도";
        let oracle: Vec<&str> = text.split_whitespace().collect();
        assert_eq!(tokenize(text, "ko"), oracle);
    }

    #[test]
    fn fixture_corpus_hangul_matches_whitespace_oracle() {
        // The ko fixture documents are written space-separated, so the
        // whitespace oracle applies to every Hangul-only field.
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.jsonl");
        let raw = std::fs::read_to_string(path).unwrap();
        let mut checked = 0;
        for line in raw.lines().filter(|l| !l.trim().is_empty()) {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            if v["lang"] == "ko" {
                let title = v["title"].as_str().unwrap();
                if title.chars().all(|c| c.is_whitespace() || super::is_hangul(c)) {
                    let oracle: Vec<&str> = title.split_whitespace().collect();
                    assert_eq!(tokenize(title, "ko"), oracle, "title: {title}");
                    checked += 1;
                }
            }
        }
        assert!(checked >= 10, "expected enough Hangul titles, got {checked}");
    }

    #[test]
    fn mixed_script_runs_separate() {
        assert_eq!(tokenize("찰스다윈(Charles Darwin)", "ko"), [
            "찰스다윈",
            "charles",
            "darwin"
        ]);
        assert_eq!(tokenize("abc한글def", "ko"), ["abc", "한글", "def"]);
    }

    #[test]
    fn digits_stay_inside_tokens() {
        assert_eq!(tokenize("bm25 and top-10", "en"), ["bm25", "and", "top", "10"]);
    }

    #[test]
    fn language_tag_does_not_change_segmentation() {
        let text = "Mixed 한국어 text";
        assert_eq!(tokenize(text, "en"), tokenize(text, "ko"));
    }
}
