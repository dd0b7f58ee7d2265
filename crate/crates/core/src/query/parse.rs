use std::collections::HashMap;

use thiserror::Error;

use super::{QueryGraph, Term, TriplePattern, VarId};
use crate::store::Dictionary;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: unsupported feature `{feature}`")]
    Unsupported {
        line: usize,
        column: usize,
        feature: String,
    },
    #[error("query patterns are not connected through shared variables")]
    Disconnected,
    #[error("projected variable ?{0} does not occur in the query body")]
    UnboundProjection(String),
    #[error("pattern {0} has a variable predicate")]
    VariablePredicate(usize),
    #[error("query is already registered as q{0}")]
    Duplicate(usize),
}

const UNSUPPORTED: &[&str] = &[
    "OPTIONAL",
    "FILTER",
    "UNION",
    "ORDER",
    "GROUP",
    "HAVING",
    "LIMIT",
    "OFFSET",
    "DISTINCT",
    "REDUCED",
    "COUNT",
    "SUM",
    "MIN",
    "MAX",
    "AVG",
    "SAMPLE",
    "MINUS",
    "BIND",
    "VALUES",
    "GRAPH",
    "SERVICE",
    "PREFIX",
    "BASE",
    "CONSTRUCT",
    "ASK",
    "DESCRIBE",
];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Var(String),
    Iri(String),
    Literal(String),
    Word(String),
    LBrace,
    RBrace,
    Dot,
    Star,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
    col: usize,
}

type Spanned = (Tok, usize, usize);

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.char_indices().peekable(),
            src,
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<(usize, char)> {
        let next = self.chars.next();
        if let Some((_, c)) = next {
            if c == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        next
    }

    fn err(&self, line: usize, column: usize, message: impl Into<String>) -> QueryError {
        QueryError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn take_while(&mut self, start: usize, pred: impl Fn(char, Option<char>) -> bool) -> &'a str {
        let mut end = start;
        while let Some(&(i, c)) = self.chars.peek() {
            let mut ahead = self.chars.clone();
            ahead.next();
            let after = ahead.peek().map(|&(_, c)| c);
            if !pred(c, after) {
                break;
            }
            self.bump();
            end = i + c.len_utf8();
        }
        &self.src[start..end]
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, QueryError> {
        let mut out = Vec::new();
        while let Some(&(i, c)) = self.chars.peek() {
            let (line, col) = (self.line, self.col);
            if c.is_whitespace() {
                self.bump();
                continue;
            }
            if c == '#' {
                while self.bump().is_some_and(|(_, c)| c != '\n') {}
                continue;
            }
            let tok = match c {
                '{' => {
                    self.bump();
                    Tok::LBrace
                }
                '}' => {
                    self.bump();
                    Tok::RBrace
                }
                '.' => {
                    self.bump();
                    Tok::Dot
                }
                '*' => {
                    self.bump();
                    Tok::Star
                }
                '?' | '$' => {
                    self.bump();
                    let name = self.take_while(i + 1, |c, _| c.is_alphanumeric() || c == '_');
                    if name.is_empty() {
                        return Err(self.err(line, col, "empty variable name"));
                    }
                    Tok::Var(name.to_owned())
                }
                '<' => {
                    self.bump();
                    let name = self.take_while(i + 1, |c, _| c != '>' && !c.is_whitespace());
                    match self.bump() {
                        Some((_, '>')) if !name.is_empty() => Tok::Iri(name.to_owned()),
                        _ => return Err(self.err(line, col, "unterminated IRI")),
                    }
                }
                '"' => {
                    self.bump();
                    let mut escaped = false;
                    let mut closed = false;
                    while let Some((_, c)) = self.bump() {
                        match c {
                            _ if escaped => escaped = false,
                            '\\' => escaped = true,
                            '"' => {
                                closed = true;
                                break;
                            }
                            _ => {}
                        }
                    }
                    if !closed {
                        return Err(self.err(line, col, "unterminated literal"));
                    }
                    let end = self.chars.peek().map_or(self.src.len(), |&(j, _)| j);
                    let suffix =
                        self.take_while(end, |c, _| !c.is_whitespace() && c != '}' && c != '.');
                    Tok::Literal(format!("{}{}", &self.src[i..end], suffix))
                }
                _ => {
                    let word = self.take_while(i, |c, after| {
                        !(c.is_whitespace()
                            || c == '{'
                            || c == '}'
                            || (c == '.' && after.is_none_or(|a| a.is_whitespace() || a == '}')))
                    });
                    if word.is_empty() {
                        return Err(self.err(line, col, format!("unexpected character `{c}`")));
                    }
                    Tok::Word(word.to_owned())
                }
            };
            out.push((tok, line, col));
        }
        Ok(out)
    }
}

fn keyword(tok: &Tok, kw: &str) -> bool {
    matches!(tok, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
}

/// Parses `SELECT (?v... | *) [WHERE] { s p o . ... }`.
///
/// Constants are interned into `dict`. Variables are numbered by first
/// appearance in the body.
pub fn parse_query(text: &str, dict: &mut Dictionary) -> Result<QueryGraph, QueryError> {
    let toks = Lexer::new(text).tokens()?;
    for (tok, line, column) in &toks {
        if let Tok::Word(w) = tok {
            if let Some(f) = UNSUPPORTED.iter().find(|f| w.eq_ignore_ascii_case(f)) {
                return Err(QueryError::Unsupported {
                    line: *line,
                    column: *column,
                    feature: f.to_string(),
                });
            }
        }
    }
    let end = {
        let (line, column) = toks.last().map_or((1, 1), |t| (t.1, t.2));
        (line, column)
    };
    let mut pos = 0;
    let at = |pos: usize| toks.get(pos).map_or(end, |t| (t.1, t.2));
    let syntax = |pos: usize, message: &str| {
        let (line, column) = at(pos);
        QueryError::Syntax {
            line,
            column,
            message: message.to_owned(),
        }
    };

    if !toks.first().is_some_and(|t| keyword(&t.0, "SELECT")) {
        return Err(syntax(0, "expected SELECT"));
    }
    pos += 1;
    let mut head: Option<Vec<(String, usize)>> = Some(Vec::new());
    match toks.get(pos).map(|t| &t.0) {
        Some(Tok::Star) => {
            head = None;
            pos += 1;
        }
        _ => {
            while let Some((Tok::Var(v), _, _)) = toks.get(pos) {
                head.as_mut().unwrap().push((v.clone(), pos));
                pos += 1;
            }
            if head.as_ref().unwrap().is_empty() {
                return Err(syntax(pos, "expected projected variables or `*`"));
            }
        }
    }
    if toks.get(pos).is_some_and(|t| keyword(&t.0, "WHERE")) {
        pos += 1;
    }
    if toks.get(pos).map(|t| &t.0) != Some(&Tok::LBrace) {
        return Err(syntax(pos, "expected `{`"));
    }
    pos += 1;

    let mut vars: HashMap<String, VarId> = HashMap::new();
    let mut var_names: Vec<String> = Vec::new();
    let mut var_id = |name: &str| -> VarId {
        *vars.entry(name.to_owned()).or_insert_with(|| {
            var_names.push(name.to_owned());
            (var_names.len() - 1) as VarId
        })
    };
    let mut patterns = Vec::new();
    loop {
        match toks.get(pos).map(|t| &t.0) {
            Some(Tok::RBrace) => {
                pos += 1;
                break;
            }
            None => return Err(syntax(pos, "expected `}`")),
            _ => {}
        }
        let mut terms = Vec::with_capacity(3);
        for _ in 0..3 {
            match toks.get(pos).map(|t| &t.0) {
                Some(Tok::Var(v)) => terms.push(Err(v.clone())),
                Some(Tok::Iri(n)) | Some(Tok::Word(n)) | Some(Tok::Literal(n)) => {
                    terms.push(Ok(n.clone()))
                }
                _ => return Err(syntax(pos, "expected a term")),
            }
            pos += 1;
        }
        if let Ok(lit) = &terms[1] {
            if lit.starts_with('"') {
                return Err(syntax(pos - 2, "literal in predicate position"));
            }
        }
        if let Ok(lit) = &terms[0] {
            if lit.starts_with('"') {
                return Err(syntax(pos - 3, "literal in subject position"));
            }
        }
        let mut node = |t: &Result<String, String>| match t {
            Err(v) => Term::Var(var_id(v)),
            Ok(c) => Term::Const(dict.intern_node(c)),
        };
        let subject = node(&terms[0]);
        let predicate = match &terms[1] {
            Err(v) => Term::Var(var_id(v)),
            Ok(c) => Term::Const(dict.intern_predicate(c)),
        };
        let mut node = |t: &Result<String, String>| match t {
            Err(v) => Term::Var(var_id(v)),
            Ok(c) => Term::Const(dict.intern_node(c)),
        };
        let object = node(&terms[2]);
        patterns.push(TriplePattern {
            subject,
            predicate,
            object,
            ordinal: patterns.len(),
        });
        match toks.get(pos).map(|t| &t.0) {
            Some(Tok::Dot) => pos += 1,
            Some(Tok::RBrace) => {}
            _ => return Err(syntax(pos, "expected `.` or `}`")),
        }
    }
    if pos != toks.len() {
        return Err(syntax(pos, "unexpected input after `}`"));
    }
    if patterns.is_empty() {
        return Err(syntax(pos.saturating_sub(1), "empty graph pattern"));
    }

    let projection = match head {
        None => (0..var_names.len() as VarId).collect(),
        Some(head) => {
            let mut out: Vec<VarId> = Vec::new();
            for (name, _) in head {
                let v = *vars
                    .get(&name)
                    .ok_or_else(|| QueryError::UnboundProjection(name.clone()))?;
                if !out.contains(&v) {
                    out.push(v);
                }
            }
            out
        }
    };
    let q = QueryGraph {
        patterns,
        projection,
        var_names,
    };
    if !q.is_connected() {
        return Err(QueryError::Disconnected);
    }
    Ok(q)
}
