//! Test-side oracles, kept independent of the crate's own evaluators.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use kgprov_core::query::{Term, TriplePattern, VarId};
use kgprov_core::{Edge, EdgeId, KnowledgeGraph, NodeId, Polynomial};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Val {
    Node(NodeId),
    Pred(u32),
}

/// Every positional match as one edge per pattern, found by scanning the
/// edges of each pattern's predicate at each level.
pub fn matches(patterns: &[TriplePattern], g: &KnowledgeGraph) -> Vec<Vec<EdgeId>> {
    let edges: Vec<Edge> = g.edges().copied().collect();
    let mut by_pred: HashMap<u32, Vec<Edge>> = HashMap::new();
    for e in &edges {
        by_pred.entry(e.predicate.0).or_default().push(*e);
    }
    let candidates: Vec<&[Edge]> = patterns
        .iter()
        .map(|t| match t.predicate {
            Term::Const(p) => by_pred.get(&p.0).map_or(&[][..], Vec::as_slice),
            Term::Var(_) => edges.as_slice(),
        })
        .collect();
    let mut order: Vec<usize> = Vec::new();
    while order.len() < patterns.len() {
        let next = (0..patterns.len())
            .filter(|i| !order.contains(i))
            .find(|&i| {
                order
                    .iter()
                    .any(|&j| patterns[i].vars().any(|v| patterns[j].has_var(v)))
            })
            .or_else(|| (0..patterns.len()).find(|i| !order.contains(i)))
            .unwrap();
        order.push(next);
    }
    let mut out = Vec::new();
    let mut chosen = vec![EdgeId(0); patterns.len()];
    let mut env: HashMap<VarId, Val> = HashMap::new();
    go(
        0,
        &order,
        patterns,
        &candidates,
        &mut env,
        &mut chosen,
        &mut out,
    );
    out
}

fn unify(env: &mut HashMap<VarId, Val>, added: &mut Vec<VarId>, v: VarId, val: Val) -> bool {
    match env.get(&v) {
        Some(x) => *x == val,
        None => {
            env.insert(v, val);
            added.push(v);
            true
        }
    }
}

fn go(
    k: usize,
    order: &[usize],
    patterns: &[TriplePattern],
    candidates: &[&[Edge]],
    env: &mut HashMap<VarId, Val>,
    chosen: &mut Vec<EdgeId>,
    out: &mut Vec<Vec<EdgeId>>,
) {
    if k == order.len() {
        if !patterns.is_empty() {
            out.push(chosen.clone());
        }
        return;
    }
    let t = patterns[order[k]];
    for e in candidates[order[k]] {
        let mut added = Vec::new();
        let ok = (match t.subject {
            Term::Const(c) => c == e.subject,
            Term::Var(v) => unify(env, &mut added, v, Val::Node(e.subject)),
        }) && (match t.predicate {
            Term::Const(c) => c == e.predicate,
            Term::Var(v) => unify(env, &mut added, v, Val::Pred(e.predicate.0)),
        }) && (match t.object {
            Term::Const(c) => c == e.object,
            Term::Var(v) => unify(env, &mut added, v, Val::Node(e.object)),
        });
        if ok {
            chosen[order[k]] = e.id;
            go(k + 1, order, patterns, candidates, env, chosen, out);
        }
        for v in added {
            env.remove(&v);
        }
    }
}

pub fn binding_of(
    patterns: &[TriplePattern],
    m: &[EdgeId],
    g: &KnowledgeGraph,
) -> HashMap<VarId, NodeId> {
    let mut b = HashMap::new();
    for (t, id) in patterns.iter().zip(m) {
        let e = g.edge(*id).unwrap();
        if let Term::Var(v) = t.subject {
            b.insert(v, e.subject);
        }
        if let Term::Var(v) = t.object {
            b.insert(v, e.object);
        }
    }
    b
}

pub fn product(m: &[EdgeId]) -> Polynomial {
    m.iter()
        .fold(Polynomial::one(), |acc, &e| acc.mul(&Polynomial::symbol(e)))
}

/// Projected answers with summed match polynomials.
pub fn answers(
    patterns: &[TriplePattern],
    projection: &[VarId],
    g: &KnowledgeGraph,
) -> BTreeMap<Vec<NodeId>, Polynomial> {
    let mut out: BTreeMap<Vec<NodeId>, Polynomial> = BTreeMap::new();
    for m in matches(patterns, g) {
        let b = binding_of(patterns, &m, g);
        let row = projection.iter().map(|v| b[v]).collect();
        out.entry(row).or_default().add_assign(&product(&m));
    }
    out
}

/// Table of a plan node whose variables are its columns `0..arity`.
pub fn node_table(
    patterns: &[TriplePattern],
    arity: usize,
    g: &KnowledgeGraph,
) -> Vec<(Vec<NodeId>, Polynomial)> {
    let cols: Vec<VarId> = (0..arity as VarId).collect();
    answers(patterns, &cols, g).into_iter().collect()
}
