//! Boolean query AST and the wire-syntax parser.
//!
//! Wire syntax, bit-exact: `|` is OR, `+` is AND and binds tighter than
//! OR, a leading `-` on a term is NOT. Terms are single words drawn from
//! any characters except `|`, `+`, `-`, and whitespace. No parentheses,
//! no whitespace.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryAst {
    /// A single lowercase token.
    Term(String),
    /// Conjunction; always has at least two children.
    And(Vec<QueryAst>),
    /// Disjunction; always has at least two children.
    Or(Vec<QueryAst>),
    Not(Box<QueryAst>),
}

impl QueryAst {
    pub fn term(token: impl Into<String>) -> Self {
        QueryAst::Term(token.into())
    }

    /// Disjunction that collapses a single child to itself.
    pub fn or(mut children: Vec<QueryAst>) -> Self {
        if children.len() == 1 {
            children.pop().unwrap()
        } else {
            QueryAst::Or(children)
        }
    }

    /// Conjunction that collapses a single child to itself.
    pub fn and(mut children: Vec<QueryAst>) -> Self {
        if children.len() == 1 {
            children.pop().unwrap()
        } else {
            QueryAst::And(children)
        }
    }

    /// Terms not under a NOT, in first-appearance order. These are the
    /// terms that contribute to relevance scoring.
    pub fn positive_terms(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_positive(&mut out);
        out
    }

    fn collect_positive<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            QueryAst::Term(t) => {
                if !out.contains(&t.as_str()) {
                    out.push(t);
                }
            }
            QueryAst::And(cs) | QueryAst::Or(cs) => {
                for c in cs {
                    c.collect_positive(out);
                }
            }
            QueryAst::Not(_) => {}
        }
    }
}

fn is_term_char(c: char) -> bool {
    !matches!(c, '|' | '+' | '-') && !c.is_whitespace()
}

struct Parser<'a> {
    input: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.input[self.pos..].chars().next()
    }

    fn bump(&mut self, c: char) {
        self.pos += c.len_utf8();
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::QueryParse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn or_expr(&mut self) -> Result<QueryAst> {
        let mut children = vec![self.and_expr()?];
        while self.peek() == Some('|') {
            self.bump('|');
            children.push(self.and_expr()?);
        }
        Ok(QueryAst::or(children))
    }

    fn and_expr(&mut self) -> Result<QueryAst> {
        let mut children = vec![self.atom()?];
        while self.peek() == Some('+') {
            self.bump('+');
            children.push(self.atom()?);
        }
        Ok(QueryAst::and(children))
    }

    fn atom(&mut self) -> Result<QueryAst> {
        if self.peek() == Some('-') {
            self.bump('-');
            let term = self.term()?;
            return Ok(QueryAst::Not(Box::new(term)));
        }
        self.term()
    }

    fn term(&mut self) -> Result<QueryAst> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if is_term_char(c) {
                self.bump(c);
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(match self.peek() {
                Some(c) if c.is_whitespace() => self.err("whitespace is not allowed"),
                Some(c) => self.err(format!("empty term before {c:?}")),
                None => self.err("empty term at end of input"),
            });
        }
        Ok(QueryAst::Term(self.input[start..self.pos].to_lowercase()))
    }
}

/// Parse serialized wire syntax into an AST. Term tokens are lowercased.
/// Errors carry the byte offset of the problem.
pub fn parse_query(serialized: &str) -> Result<QueryAst> {
    if serialized.is_empty() {
        return Err(Error::QueryParse {
            offset: 0,
            message: "empty query".to_string(),
        });
    }
    let mut parser = Parser {
        input: serialized,
        pos: 0,
    };
    let ast = parser.or_expr()?;
    if parser.pos != serialized.len() {
        return Err(parser.err("trailing input"));
    }
    Ok(ast)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> QueryAst {
        QueryAst::term(s)
    }

    #[test]
    fn and_binds_tighter_than_or() {
        // The AND=2 construction: one disjunct plus a three-way conjunct.
        let ast = parse_query("free|textbook+mathematics+school").unwrap();
        assert_eq!(
            ast,
            QueryAst::Or(vec![
                t("free"),
                QueryAst::And(vec![t("textbook"), t("mathematics"), t("school")]),
            ])
        );
    }

    #[test]
    fn and_count_one_shape() {
        let ast = parse_query("free|textbook|mathematics+school").unwrap();
        assert_eq!(
            ast,
            QueryAst::Or(vec![
                t("free"),
                t("textbook"),
                QueryAst::And(vec![t("mathematics"), t("school")]),
            ])
        );
    }

    #[test]
    fn single_term() {
        assert_eq!(parse_query("free").unwrap(), t("free"));
    }

    #[test]
    fn not_prefix() {
        assert_eq!(
            parse_query("a+-b").unwrap(),
            QueryAst::And(vec![t("a"), QueryAst::Not(Box::new(t("b")))])
        );
        assert_eq!(
            parse_query("-a").unwrap(),
            QueryAst::Not(Box::new(t("a")))
        );
    }

    #[test]
    fn terms_are_lowercased() {
        assert_eq!(parse_query("FreeTEXT").unwrap(), t("freetext"));
    }

    #[test]
    fn hangul_terms_parse() {
        let ast = parse_query("무상|교과서").unwrap();
        assert_eq!(ast, QueryAst::Or(vec![t("무상"), t("교과서")]));
    }

    #[test]
    fn parse_errors_name_byte_offsets() {
        match parse_query("") {
            Err(Error::QueryParse { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_query("a|") {
            Err(Error::QueryParse { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_query("|a") {
            Err(Error::QueryParse { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_query("a b") {
            Err(Error::QueryParse { offset, .. }) => assert_eq!(offset, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_query("a++b") {
            Err(Error::QueryParse { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn positive_terms_skip_negated() {
        let ast = parse_query("a|b+-c").unwrap();
        assert_eq!(ast.positive_terms(), ["a", "b"]);
    }
}
