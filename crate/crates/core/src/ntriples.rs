//! Line-oriented loader for a subset of N-Triples: `<s> <p> <o> .` per line,
//! `#` comments and blank lines skipped. IRIs lose their angle brackets;
//! quoted literals keep their quotes so they never collide with IRIs.

use std::path::Path;

use thiserror::Error;

use crate::store::{EdgeId, KnowledgeGraph};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Splits one term off the front of `s`. Returns the term's name and the rest.
pub fn next_term(s: &str) -> Result<Option<(String, &str)>, String> {
    let s = s.trim_start();
    let Some(first) = s.chars().next() else {
        return Ok(None);
    };
    match first {
        '<' => {
            let end = s
                .find('>')
                .ok_or_else(|| format!("unterminated IRI `{s}`"))?;
            let name = &s[1..end];
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(format!("invalid IRI `<{name}>`"));
            }
            Ok(Some((name.to_owned(), &s[end + 1..])))
        }
        '"' => {
            let mut escaped = false;
            let mut close = None;
            for (i, c) in s.char_indices().skip(1) {
                match c {
                    _ if escaped => escaped = false,
                    '\\' => escaped = true,
                    '"' => {
                        close = Some(i);
                        break;
                    }
                    _ => {}
                }
            }
            let close = close.ok_or_else(|| format!("unterminated literal `{s}`"))?;
            // Keep a language tag or datatype suffix attached to the literal.
            let tail = &s[close + 1..];
            let suffix_len = tail.find(char::is_whitespace).unwrap_or(tail.len());
            let end = close + 1 + suffix_len;
            Ok(Some((s[..end].to_owned(), &s[end..])))
        }
        _ => {
            let end = s.find(char::is_whitespace).unwrap_or(s.len());
            Ok(Some((s[..end].to_owned(), &s[end..])))
        }
    }
}

/// Parses `<s> <p> <o>` with an optional trailing ` .`.
pub fn parse_triple(line: &str) -> Result<(String, String, String), String> {
    let mut rest = line;
    let mut terms = Vec::with_capacity(3);
    while terms.len() < 3 {
        match next_term(rest)? {
            Some((t, r)) if t != "." => {
                terms.push(t);
                rest = r;
            }
            _ => return Err(format!("expected 3 terms, found {}", terms.len())),
        }
    }
    let tail = rest.trim();
    if !(tail.is_empty() || tail == ".") {
        return Err(format!("unexpected trailing input `{tail}`"));
    }
    let mut it = terms.into_iter();
    Ok((it.next().unwrap(), it.next().unwrap(), it.next().unwrap()))
}

/// Loads triples from text into `graph`; edge ids follow line order.
pub fn load_str(graph: &mut KnowledgeGraph, text: &str) -> Result<Vec<EdgeId>, LoadError> {
    let mut ids = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !line.ends_with('.') {
            return Err(LoadError::Syntax {
                line: i + 1,
                message: "missing terminating `.`".into(),
            });
        }
        let (s, p, o) = parse_triple(line).map_err(|message| LoadError::Syntax {
            line: i + 1,
            message,
        })?;
        ids.push(graph.insert_triple(&s, &p, &o));
    }
    Ok(ids)
}

pub fn load_file(
    graph: &mut KnowledgeGraph,
    path: impl AsRef<Path>,
) -> Result<Vec<EdgeId>, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_str(graph, &text)
}

/// Inverse of the loader for one edge.
pub fn format_term(name: &str) -> String {
    if name.starts_with('"') {
        name.to_owned()
    } else {
        format!("<{name}>")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_in_file_order() {
        let mut g = KnowledgeGraph::new();
        let text = "# header\n<a> <p> <b> .\n\n<b> <q> \"lit with space\"@en .\n";
        let ids = load_str(&mut g, text).unwrap();
        assert_eq!(ids, vec![EdgeId(1), EdgeId(2)]);
        let lit = g.dictionary().node("\"lit with space\"@en");
        assert!(lit.is_some());
    }

    #[test]
    fn errors_name_the_line() {
        let mut g = KnowledgeGraph::new();
        let err = load_str(&mut g, "<a> <p> <b> .\n<a> <p> .\n").unwrap_err();
        assert!(err.to_string().starts_with("line 2:"), "{err}");
        let err = load_str(&mut g, "<a> <p> <b>\n").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn empty_input() {
        let mut g = KnowledgeGraph::new();
        assert!(load_str(&mut g, "").unwrap().is_empty());
        assert_eq!(
            (g.vertex_count(), g.edge_count(), g.predicate_count()),
            (0, 0, 0)
        );
    }
}
