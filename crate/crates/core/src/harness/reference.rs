use std::collections::{BTreeMap, HashMap};

use crate::provenance::{Monomial, Polynomial};
use crate::query::{QueryGraph, Term, TriplePattern};
use crate::store::{Edge, EdgeId, KnowledgeGraph, NodeId, PredicateId};

/// Positional matches: one edge per pattern, in pattern order.
pub fn enumerate_matches(patterns: &[TriplePattern], g: &KnowledgeGraph) -> Vec<Vec<EdgeId>> {
    let mut by_pred: HashMap<PredicateId, Vec<Edge>> = HashMap::new();
    for e in g.edges() {
        by_pred.entry(e.predicate).or_default().push(*e);
    }
    // Visit patterns so each one after the first shares a variable with an
    // earlier one when possible.
    let mut order: Vec<usize> = Vec::new();
    let mut left: Vec<usize> = (0..patterns.len()).collect();
    while !left.is_empty() {
        let k = left
            .iter()
            .position(|&i| {
                order
                    .iter()
                    .any(|&j| patterns[i].shares_var_with(&patterns[j]))
            })
            .unwrap_or(0);
        order.push(left.remove(k));
    }
    let var_count = patterns
        .iter()
        .flat_map(|t| t.vars())
        .max()
        .map_or(0, |v| v as usize + 1);
    let mut nodes: Vec<Option<NodeId>> = vec![None; var_count];
    let mut chosen: Vec<EdgeId> = vec![EdgeId(0); patterns.len()];
    let mut out = Vec::new();
    fn step(
        k: usize,
        order: &[usize],
        patterns: &[TriplePattern],
        by_pred: &HashMap<PredicateId, Vec<Edge>>,
        nodes: &mut Vec<Option<NodeId>>,
        chosen: &mut Vec<EdgeId>,
        out: &mut Vec<Vec<EdgeId>>,
    ) {
        if k == order.len() {
            out.push(chosen.clone());
            return;
        }
        let i = order[k];
        let t = patterns[i];
        let Some(p) = t.predicate.constant() else {
            return;
        };
        for e in by_pred.get(&p).into_iter().flatten() {
            let mut fresh: Vec<usize> = Vec::new();
            let mut ok = true;
            for (term, val) in [(t.subject, e.subject), (t.object, e.object)] {
                match term {
                    Term::Const(c) => ok &= c == val,
                    Term::Var(v) => match nodes[v as usize] {
                        Some(x) => ok &= x == val,
                        None => {
                            nodes[v as usize] = Some(val);
                            fresh.push(v as usize);
                        }
                    },
                }
                if !ok {
                    break;
                }
            }
            if ok {
                chosen[i] = e.id;
                step(k + 1, order, patterns, by_pred, nodes, chosen, out);
            }
            for v in fresh {
                nodes[v] = None;
            }
        }
    }
    if !patterns.is_empty() {
        step(
            0,
            &order,
            patterns,
            &by_pred,
            &mut nodes,
            &mut chosen,
            &mut out,
        );
    }
    out
}

/// Variable values implied by a positional match.
pub fn match_binding(
    patterns: &[TriplePattern],
    edges: &[EdgeId],
    g: &KnowledgeGraph,
) -> HashMap<u32, NodeId> {
    let mut b = HashMap::new();
    for (t, id) in patterns.iter().zip(edges) {
        let e = g.edge(*id).expect("match edges are live");
        if let Term::Var(v) = t.subject {
            b.insert(v, e.subject);
        }
        if let Term::Var(v) = t.object {
            b.insert(v, e.object);
        }
    }
    b
}

pub fn monomial_of(edges: &[EdgeId]) -> Monomial {
    Monomial::from_factors(edges.iter().map(|&e| (e, 1)))
}

/// Nested-loop evaluation used as the verification oracle.
pub fn reference_answers(q: &QueryGraph, g: &KnowledgeGraph) -> BTreeMap<Vec<NodeId>, Polynomial> {
    let mut out: BTreeMap<Vec<NodeId>, Polynomial> = BTreeMap::new();
    for m in enumerate_matches(&q.patterns, g) {
        let b = match_binding(&q.patterns, &m, g);
        let row: Vec<NodeId> = q.projection.iter().map(|v| b[v]).collect();
        out.entry(row).or_default().add_term(monomial_of(&m), 1);
    }
    out
}
