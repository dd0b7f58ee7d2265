use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::{QueryGraph, Term, TriplePattern, VarId};
use crate::store::{Dictionary, NodeId, PredicateId};

/// Patterns up to this size get an exact search over tied orderings.
const EXACT_LIMIT: usize = 8;

/// One encoded term. Variants order variables before constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Code {
    Var(u32),
    Node(u32),
    Pred(u32),
}

/// Representation shared by every query equal up to variable renaming and
/// pattern order. Each pattern is encoded predicate first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CanonicalForm {
    pub patterns: Vec<[Code; 3]>,
    /// Canonical indices of the projected variables, ascending.
    pub projection: Vec<u32>,
    pub var_count: u32,
}

/// A canonical form together with how the input maps onto it.
#[derive(Debug, Clone)]
pub struct Canonicalization {
    pub form: CanonicalForm,
    /// `order[k]` is the input position of canonical pattern `k`.
    pub order: Vec<usize>,
    /// Input variable to canonical variable index.
    pub renaming: HashMap<VarId, u32>,
}

type Sig = (Code, Code, Code, bool);

fn signature(t: &TriplePattern) -> Sig {
    let node = |x: Term<NodeId>| match x {
        Term::Var(_) => Code::Var(0),
        Term::Const(c) => Code::Node(c.0),
    };
    let pred = match t.predicate {
        Term::Var(_) => Code::Var(0),
        Term::Const(c) => Code::Pred(c.0),
    };
    let self_loop = matches!((t.subject, t.object), (Term::Var(a), Term::Var(b)) if a == b);
    (pred, node(t.subject), node(t.object), self_loop)
}

fn encode(t: &TriplePattern, ren: &mut Vec<(VarId, u32)>) -> [Code; 3] {
    let mut var = |v: VarId| -> Code {
        if let Some(&(_, c)) = ren.iter().find(|(x, _)| *x == v) {
            return Code::Var(c);
        }
        let c = ren.len() as u32;
        ren.push((v, c));
        Code::Var(c)
    };
    let p = match t.predicate {
        Term::Var(v) => var(v),
        Term::Const(PredicateId(c)) => Code::Pred(c),
    };
    let s = match t.subject {
        Term::Var(v) => var(v),
        Term::Const(NodeId(c)) => Code::Node(c),
    };
    let o = match t.object {
        Term::Var(v) => var(v),
        Term::Const(NodeId(c)) => Code::Node(c),
    };
    [p, s, o]
}

type Renaming = Vec<(VarId, u32)>;
/// Encoded patterns, projection, pattern order and variable renaming.
type Best = (Vec<[Code; 3]>, Vec<u32>, Vec<usize>, Renaming);

struct Search<'a> {
    pats: &'a [TriplePattern],
    projection: &'a [VarId],
    exact: bool,
    best: Option<Best>,
}

impl Search<'_> {
    fn run(
        &mut self,
        remaining: &mut Vec<usize>,
        order: &mut Vec<usize>,
        enc: &mut Vec<[Code; 3]>,
        ren: &mut Vec<(VarId, u32)>,
    ) {
        if remaining.is_empty() {
            let mut proj: Vec<u32> = self
                .projection
                .iter()
                .filter_map(|v| ren.iter().find(|(x, _)| x == v).map(|&(_, c)| c))
                .collect();
            proj.sort_unstable();
            let better = match &self.best {
                None => true,
                Some((be, bp, _, _)) => (&*enc, &proj) < (be, bp),
            };
            if better {
                self.best = Some((enc.clone(), proj, order.clone(), ren.clone()));
            }
            return;
        }
        let head = signature(&self.pats[remaining[0]]);
        let tied: Vec<usize> = remaining
            .iter()
            .copied()
            .take_while(|&i| signature(&self.pats[i]) == head)
            .collect();
        let mut candidates: Vec<(usize, [Code; 3], Renaming)> = Vec::new();
        for i in tied {
            let mut r = ren.clone();
            let code = encode(&self.pats[i], &mut r);
            match candidates.first().map(|c| c.1) {
                Some(best) if code > best => continue,
                Some(best) if code < best => candidates.clear(),
                _ => {}
            }
            candidates.push((i, code, r));
        }
        if !self.exact {
            candidates.truncate(1);
        }
        for (i, code, r) in candidates {
            enc.push(code);
            if let Some((be, ..)) = &self.best {
                if enc[..] > be[..enc.len()] {
                    enc.pop();
                    continue;
                }
            }
            let pos = remaining.iter().position(|&x| x == i).unwrap();
            remaining.remove(pos);
            order.push(i);
            let saved = std::mem::replace(ren, r);
            self.run(remaining, order, enc, ren);
            *ren = saved;
            order.pop();
            remaining.insert(pos, i);
            enc.pop();
        }
    }
}

/// Canonicalizes a pattern list with an explicit projection.
pub fn canonicalize_patterns(patterns: &[TriplePattern], projection: &[VarId]) -> Canonicalization {
    let mut remaining: Vec<usize> = (0..patterns.len()).collect();
    remaining.sort_by_key(|&i| signature(&patterns[i]));
    let mut search = Search {
        pats: patterns,
        projection,
        exact: patterns.len() <= EXACT_LIMIT,
        best: None,
    };
    search.run(
        &mut remaining,
        &mut Vec::new(),
        &mut Vec::new(),
        &mut Vec::new(),
    );
    let (enc, proj, order, ren) = search.best.unwrap_or_default();
    Canonicalization {
        form: CanonicalForm {
            patterns: enc,
            projection: proj,
            var_count: ren.len() as u32,
        },
        order,
        renaming: ren.into_iter().collect(),
    }
}

pub fn canonicalize(q: &QueryGraph) -> Canonicalization {
    canonicalize_patterns(&q.patterns, &q.projection)
}

/// Renders a canonical form as query text that parses back to the same form.
pub fn pretty_print(form: &CanonicalForm, dict: &Dictionary) -> String {
    let term = |c: Code| match c {
        Code::Var(v) => format!("?v{v}"),
        Code::Node(n) => crate::ntriples::format_term(dict.node_name(NodeId(n))),
        Code::Pred(p) => format!("<{}>", dict.predicate_name(PredicateId(p))),
    };
    let mut out = String::from("SELECT");
    if form.projection.is_empty() {
        out.push_str(" *");
    }
    for v in &form.projection {
        let _ = write!(out, " ?v{v}");
    }
    out.push_str(" WHERE {");
    for [p, s, o] in &form.patterns {
        let _ = write!(out, " {} {} {} .", term(*s), term(*p), term(*o));
    }
    out.push_str(" }");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_query;

    fn canon(text: &str, d: &mut Dictionary) -> CanonicalForm {
        canonicalize(&parse_query(text, d).unwrap()).form
    }

    #[test]
    fn alpha_renaming() {
        let mut d = Dictionary::default();
        let a = canon("SELECT * WHERE { ?a p ?b . ?b q c }", &mut d);
        let b = canon("SELECT * WHERE { ?y q c . ?x p ?y }", &mut d);
        assert_eq!(a, b);
        let c = canon("SELECT * WHERE { ?x p ?y . ?x q c }", &mut d);
        assert_ne!(a, c);
    }

    #[test]
    fn projection_is_part_of_the_form() {
        let mut d = Dictionary::default();
        let a = canon("SELECT ?a WHERE { ?a p ?b }", &mut d);
        let b = canon("SELECT ?b WHERE { ?a p ?b }", &mut d);
        assert_ne!(a, b);
    }

    #[test]
    fn symmetric_patterns_pick_the_minimal_projection() {
        let mut d = Dictionary::default();
        let a = canon("SELECT ?y WHERE { ?x p ?y . ?x p ?z }", &mut d);
        let b = canon("SELECT ?z WHERE { ?x p ?y . ?x p ?z }", &mut d);
        assert_eq!(a, b);
    }

    #[test]
    fn print_parse_round_trip() {
        let mut d = Dictionary::default();
        let f = canon(
            "SELECT ?prof ?collab WHERE { ?stud hadAdvisor ?prof . ?prof worksIn ?org2 . ?collab coAuthor ?stud . ?collab hasDegree PhD . ?collab worksIn ?org1 }",
            &mut d,
        );
        let text = pretty_print(&f, &d);
        assert_eq!(canon(&text, &mut d), f);
        assert_eq!(pretty_print(&canon(&text, &mut d), &d), text);
    }
}
