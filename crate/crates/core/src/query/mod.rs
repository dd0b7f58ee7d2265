//! Basic graph pattern queries: representation, parsing, classification and
//! canonical forms.

mod canonical;
mod classify;
mod parse;

pub use canonical::{
    canonicalize, canonicalize_patterns, pretty_print, CanonicalForm, Canonicalization, Code,
};
pub use classify::{
    can_co_bind, classify_query, Classification, PredicateFlags, PredicateMetadata, SharedGroup,
};
pub use parse::{parse_query, QueryError};

use serde::Serialize;

use crate::store::{Dictionary, Edge, NodeId, PredicateId};

/// Index of a variable within its query.
pub type VarId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Term<C> {
    Var(VarId),
    Const(C),
}

impl<C: Copy> Term<C> {
    pub fn var(&self) -> Option<VarId> {
        match *self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn constant(&self) -> Option<C> {
        match *self {
            Term::Var(_) => None,
            Term::Const(c) => Some(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct TriplePattern {
    pub subject: Term<NodeId>,
    pub predicate: Term<PredicateId>,
    pub object: Term<NodeId>,
    /// Zero-based position in the query text.
    pub ordinal: usize,
}

impl TriplePattern {
    pub fn vars(&self) -> impl Iterator<Item = VarId> {
        [self.subject.var(), self.predicate.var(), self.object.var()]
            .into_iter()
            .flatten()
    }

    pub fn has_var(&self, v: VarId) -> bool {
        self.vars().any(|x| x == v)
    }

    /// Constant predicate, if any.
    pub fn predicate_id(&self) -> Option<PredicateId> {
        self.predicate.constant()
    }

    /// Whether `edge` fits this pattern on its own: constants agree and a
    /// repeated variable sees equal values.
    pub fn admits(&self, edge: &Edge) -> bool {
        let c_ok = |t: Term<NodeId>, n: NodeId| t.constant().is_none_or(|c| c == n);
        if !c_ok(self.subject, edge.subject) || !c_ok(self.object, edge.object) {
            return false;
        }
        if self
            .predicate
            .constant()
            .is_some_and(|p| p != edge.predicate)
        {
            return false;
        }
        match (self.subject, self.object) {
            (Term::Var(a), Term::Var(b)) if a == b => edge.subject == edge.object,
            _ => true,
        }
    }

    pub fn shares_var_with(&self, other: &TriplePattern) -> bool {
        self.vars().any(|v| other.has_var(v))
    }
}

/// A conjunction of triple patterns plus a projection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryGraph {
    pub patterns: Vec<TriplePattern>,
    pub projection: Vec<VarId>,
    pub var_names: Vec<String>,
}

impl QueryGraph {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn var_count(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.var_names[v as usize]
    }

    /// True when the patterns are connected through shared variables.
    pub fn is_connected(&self) -> bool {
        let idx: Vec<usize> = (0..self.patterns.len()).collect();
        components(&self.patterns, &idx).len() <= 1
    }

    /// Text form with the original variable names.
    pub fn to_sparql(&self, dict: &Dictionary) -> String {
        let var = |v: VarId| format!("?{}", self.var_name(v));
        let node = |t: Term<NodeId>| match t {
            Term::Var(v) => var(v),
            Term::Const(c) => crate::ntriples::format_term(dict.node_name(c)),
        };
        let pred = |t: Term<PredicateId>| match t {
            Term::Var(v) => var(v),
            Term::Const(c) => format!("<{}>", dict.predicate_name(c)),
        };
        let head = if self.projection.is_empty() {
            "*".to_owned()
        } else {
            self.projection
                .iter()
                .map(|&v| var(v))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let body: Vec<String> = self
            .patterns
            .iter()
            .map(|t| {
                format!(
                    "{} {} {} .",
                    node(t.subject),
                    pred(t.predicate),
                    node(t.object)
                )
            })
            .collect();
        format!("SELECT {head} WHERE {{ {} }}", body.join(" "))
    }
}

/// Connected components of `subset` (indices into `patterns`) under variable
/// sharing. Components and their members come out in ascending index order.
pub fn components(patterns: &[TriplePattern], subset: &[usize]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..subset.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..subset.len() {
        for j in i + 1..subset.len() {
            if patterns[subset[i]].shares_var_with(&patterns[subset[j]]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &p) in subset.iter().enumerate() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(p);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    for c in &mut out {
        c.sort_unstable();
    }
    out.sort();
    out
}
