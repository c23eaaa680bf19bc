//! Strategic query generation: the progressive OR ladder, the AND-count
//! variants used by the sweep experiment, and AST serialization to the
//! engine wire syntax.

use serde::{Deserialize, Serialize};

use crate::engine::query::QueryAst;
use crate::error::{Error, Result};
use crate::keywords::KeywordSet;

/// A Boolean query plus its serialized wire form.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchQuery {
    pub ast: QueryAst,
    pub serialized: String,
}

impl SearchQuery {
    fn from_ast(ast: QueryAst) -> Result<Self> {
        let serialized = serialize(&ast)?;
        Ok(Self { ast, serialized })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderLevel {
    /// How many leading keywords this level covers.
    pub n: usize,
    pub query: SearchQuery,
}

/// The queries SQ_n for n = |K| down to 1: level n is the disjunction of
/// the n most important keywords, so the ladder starts broad and narrows.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryLadder {
    pub levels: Vec<LadderLevel>,
}

impl QueryLadder {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn serialized(&self) -> Vec<&str> {
        self.levels.iter().map(|l| l.query.serialized.as_str()).collect()
    }
}

/// Summary of a ladder for traces: (n, serialized) pairs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LadderSummary {
    pub levels: Vec<(usize, String)>,
}

impl From<&QueryLadder> for LadderSummary {
    fn from(ladder: &QueryLadder) -> Self {
        Self {
            levels: ladder
                .levels
                .iter()
                .map(|l| (l.n, l.query.serialized.clone()))
                .collect(),
        }
    }
}

fn term_for(surface: &str) -> QueryAst {
    QueryAst::term(surface.to_lowercase())
}

/// Build the OR ladder for a keyword set. Level n (from |K| down to 1) is
/// the OR of keywords 1..=n; level 1 is a bare term.
pub fn generate_or_ladder(keywords: &KeywordSet) -> Result<QueryLadder> {
    if keywords.is_empty() {
        return Err(Error::NoKeywords);
    }
    let surfaces = keywords.surfaces();
    let mut levels = Vec::with_capacity(surfaces.len());
    for n in (1..=surfaces.len()).rev() {
        let ast = QueryAst::or(surfaces[..n].iter().map(|s| term_for(s)).collect());
        levels.push(LadderLevel {
            n,
            query: SearchQuery::from_ast(ast)?,
        });
    }
    Ok(QueryLadder { levels })
}

/// Build the AND-variant of the full keyword list: the last
/// `and_count + 1` keywords join into a single conjunct and everything
/// joins by OR. `and_count = 0` is the pure OR query; `and_count = m - 1`
/// is the all-AND query.
pub fn generate_and_variant(keywords: &KeywordSet, and_count: usize) -> Result<SearchQuery> {
    let surfaces = keywords.surfaces();
    let m = surfaces.len();
    if m == 0 {
        return Err(Error::NoKeywords);
    }
    if and_count > m - 1 {
        return Err(Error::AndCountOutOfRange {
            and_count,
            keyword_count: m,
        });
    }
    let split = m - (and_count + 1);
    let mut children: Vec<QueryAst> = surfaces[..split].iter().map(|s| term_for(s)).collect();
    children.push(QueryAst::and(
        surfaces[split..].iter().map(|s| term_for(s)).collect(),
    ));
    SearchQuery::from_ast(QueryAst::or(children))
}

fn check_term(token: &str) -> Result<()> {
    let bad = |message: &str| {
        Err(Error::QuerySerialize {
            term: token.to_string(),
            message: message.to_string(),
        })
    };
    if token.is_empty() {
        return bad("empty term");
    }
    if token.chars().any(|c| c.is_whitespace()) {
        return bad("contains whitespace");
    }
    if token.contains('|') || token.contains('+') || token.contains('-') {
        return bad("contains a reserved operator character");
    }
    Ok(())
}

fn serialize_into(ast: &QueryAst, parent_is_and: bool, out: &mut String) -> Result<()> {
    match ast {
        QueryAst::Term(token) => {
            check_term(token)?;
            out.push_str(token);
        }
        QueryAst::Not(child) => match child.as_ref() {
            QueryAst::Term(token) => {
                check_term(token)?;
                out.push('-');
                out.push_str(token);
            }
            _ => {
                return Err(Error::QuerySerialize {
                    term: String::new(),
                    message: "NOT of a non-term cannot be written without parentheses".to_string(),
                })
            }
        },
        QueryAst::And(children) => {
            for (i, child) in children.iter().enumerate() {
                if i > 0 {
                    out.push('+');
                }
                serialize_into(child, true, out)?;
            }
        }
        QueryAst::Or(children) => {
            if parent_is_and {
                return Err(Error::QuerySerialize {
                    term: String::new(),
                    message: "OR under AND cannot be written without parentheses".to_string(),
                });
            }
            for (i, child) in children.iter().enumerate() {
                if i > 0 {
                    out.push('|');
                }
                serialize_into(child, false, out)?;
            }
        }
    }
    Ok(())
}

/// Serialize an AST to the wire syntax. The grammar has no parentheses,
/// so only parser-shaped ASTs serialize: OR at the top, AND below it,
/// NOT only on terms. Terms must not contain `|`, `+`, `-`, or
/// whitespace.
pub fn serialize(ast: &QueryAst) -> Result<String> {
    let mut out = String::new();
    serialize_into(ast, false, &mut out)?;
    Ok(out)
}
