//! Provenance-aware evaluation: direct BGP matching, plan materialization and
//! single-edge delta propagation through the global plan.

mod table;

pub use table::{Row, RowId, Table};

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use crate::planner::{GlobalPlan, Join};
use crate::provenance::{Monomial, Polynomial};
use crate::query::{QueryGraph, Term, TriplePattern, VarId};
use crate::store::{Edge, EdgeId, KnowledgeGraph, NodeId, PredicateId};

/// One answer: projected values plus the polynomial of all derivations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BindingRow {
    pub bindings: Vec<NodeId>,
    #[serde(serialize_with = "crate::eval::poly_text")]
    pub provenance: Polynomial,
}

type RowRef<'a> = (&'a Box<[NodeId]>, &'a Polynomial);

/// Receives node bindings, predicate bindings and matched edges.
type Emit<'a> = dyn FnMut(&[Option<NodeId>], &[Option<PredicateId>], &[EdgeId]) + 'a;

pub(crate) fn poly_text<S: serde::Serializer>(p: &Polynomial, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&p.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowChange {
    pub bindings: Vec<NodeId>,
    /// Monomials dropped from the row.
    pub pruned: Polynomial,
    pub row_removed: bool,
}

/// Per-node change from one update.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResultDelta {
    /// Polynomials added to rows (created or existing).
    pub added: Vec<BindingRow>,
    pub removed: Vec<RowChange>,
}

struct Matcher<'a> {
    g: &'a KnowledgeGraph,
    patterns: &'a [TriplePattern],
    order: Vec<usize>,
    nodes: Vec<Option<NodeId>>,
    preds: Vec<Option<PredicateId>>,
    edges: Vec<EdgeId>,
}

impl Matcher<'_> {
    fn node(&self, t: Term<NodeId>) -> Option<NodeId> {
        match t {
            Term::Const(c) => Some(c),
            Term::Var(v) => self.nodes[v as usize],
        }
    }

    fn pred(&self, t: Term<PredicateId>) -> Option<PredicateId> {
        match t {
            Term::Const(c) => Some(c),
            Term::Var(v) => self.preds[v as usize],
        }
    }

    fn run(&mut self, k: usize, emit: &mut Emit<'_>) {
        if k == self.order.len() {
            emit(&self.nodes, &self.preds, &self.edges);
            return;
        }
        let t = self.patterns[self.order[k]];
        let (s, p, o) = (
            self.node(t.subject),
            self.pred(t.predicate),
            self.node(t.object),
        );
        let g = self.g;
        for e in g.lookup(s, p, o) {
            if let (Term::Var(a), Term::Var(b)) = (t.subject, t.object) {
                if a == b && e.subject != e.object {
                    continue;
                }
            }
            let mut bound: Vec<(bool, VarId)> = Vec::new();
            for (term, val) in [(t.subject, e.subject), (t.object, e.object)] {
                if let Term::Var(v) = term {
                    if self.nodes[v as usize].is_none() {
                        self.nodes[v as usize] = Some(val);
                        bound.push((true, v));
                    }
                }
            }
            if let Term::Var(v) = t.predicate {
                if self.preds[v as usize].is_none() {
                    self.preds[v as usize] = Some(e.predicate);
                    bound.push((false, v));
                }
            }
            self.edges.push(e.id);
            self.run(k + 1, emit);
            self.edges.pop();
            for (is_node, v) in bound {
                if is_node {
                    self.nodes[v as usize] = None;
                } else {
                    self.preds[v as usize] = None;
                }
            }
        }
    }
}

/// Join order for backtracking: cheapest pattern first, then always a
/// pattern that shares a variable with what is already placed.
fn match_order(patterns: &[TriplePattern], g: &KnowledgeGraph) -> Vec<usize> {
    let cost = |t: &TriplePattern| {
        g.lookup_len(
            t.subject.constant(),
            t.predicate.constant(),
            t.object.constant(),
        )
    };
    let mut left: Vec<usize> = (0..patterns.len()).collect();
    let mut order = Vec::with_capacity(left.len());
    let mut bound: HashSet<VarId> = HashSet::new();
    while !left.is_empty() {
        let pick = left
            .iter()
            .copied()
            .min_by_key(|&i| {
                let t = &patterns[i];
                let shared = t.vars().filter(|v| bound.contains(v)).count();
                (
                    order.is_empty() || shared == 0,
                    std::cmp::Reverse(shared),
                    cost(t),
                    i,
                )
            })
            .unwrap();
        left.retain(|&i| i != pick);
        bound.extend(patterns[pick].vars());
        order.push(pick);
    }
    order
}

/// All matches of `patterns`, grouped by the projected variables.
///
/// Each match contributes the product of its matched edges; matches that
/// agree on the projection are summed.
pub fn evaluate_patterns(
    patterns: &[TriplePattern],
    var_count: usize,
    projection: &[VarId],
    g: &KnowledgeGraph,
) -> BTreeMap<Vec<NodeId>, Polynomial> {
    let mut out: BTreeMap<Vec<NodeId>, Polynomial> = BTreeMap::new();
    if patterns.is_empty() {
        return out;
    }
    let mut m = Matcher {
        g,
        patterns,
        order: match_order(patterns, g),
        nodes: vec![None; var_count],
        preds: vec![None; var_count],
        edges: Vec::with_capacity(patterns.len()),
    };
    m.run(0, &mut |nodes, preds, edges| {
        let key: Vec<NodeId> = projection
            .iter()
            .map(|&v| {
                nodes[v as usize]
                    .unwrap_or_else(|| NodeId(preds[v as usize].map_or(u32::MAX, |p| p.0)))
            })
            .collect();
        let mono = Monomial::from_factors(edges.iter().map(|&e| (e, 1)));
        out.entry(key).or_default().add_term(mono, 1);
    });
    out
}

/// Answers of `q` on `g` with their polynomials, sorted by bindings.
pub fn evaluate_bgp(q: &QueryGraph, g: &KnowledgeGraph) -> Vec<BindingRow> {
    evaluate_patterns(&q.patterns, q.var_count(), &q.projection, g)
        .into_iter()
        .map(|(bindings, provenance)| BindingRow {
            bindings,
            provenance,
        })
        .collect()
}

/// Binding a single-pattern expression gets from `e`, if the edge fits.
pub fn leaf_binding(t: &TriplePattern, arity: usize, e: &Edge) -> Option<Vec<NodeId>> {
    if !t.admits(e) {
        return None;
    }
    let mut b = vec![NodeId(u32::MAX); arity];
    if let Term::Var(v) = t.subject {
        b[v as usize] = e.subject;
    }
    if let Term::Var(v) = t.object {
        b[v as usize] = e.object;
    }
    Some(b)
}

fn combine(join: &Join, arity: usize, left: &[NodeId], right: &[NodeId]) -> Box<[NodeId]> {
    let mut b = vec![NodeId(u32::MAX); arity].into_boxed_slice();
    for (c, &pc) in join.left_map.iter().enumerate() {
        b[pc] = left[c];
    }
    for (c, &pc) in join.right_map.iter().enumerate() {
        b[pc] = right[c];
    }
    b
}

fn key_of(binding: &[NodeId], cols: &[usize]) -> Vec<NodeId> {
    cols.iter().map(|&c| binding[c]).collect()
}

/// Fills every node that has not been materialized yet.
pub fn materialize_plan(plan: &mut GlobalPlan, g: &KnowledgeGraph) {
    let topo = plan.topological().to_vec();
    for n in topo {
        if plan.nodes[n].materialized {
            continue;
        }
        let arity = plan.nodes[n].arity();
        let rows: Vec<(Box<[NodeId]>, Polynomial)> = match &plan.nodes[n].join {
            None => {
                let t = plan.nodes[n].patterns[0];
                g.lookup(
                    t.subject.constant(),
                    t.predicate.constant(),
                    t.object.constant(),
                )
                .filter_map(|e| {
                    leaf_binding(&t, arity, e)
                        .map(|b| (b.into_boxed_slice(), Polynomial::symbol(e.id)))
                })
                .collect()
            }
            Some(j) => {
                let (lt, rt) = (&plan.nodes[j.left].table, &plan.nodes[j.right].table);
                let mut out = Vec::new();
                if lt.len() <= rt.len() {
                    for l in lt.rows() {
                        for r in rt.probe(j.right_index, &key_of(&l.binding, &j.left_key)) {
                            out.push((
                                combine(j, arity, &l.binding, &r.binding),
                                l.poly.mul(&r.poly),
                            ));
                        }
                    }
                } else {
                    for r in rt.rows() {
                        for l in lt.probe(j.left_index, &key_of(&r.binding, &j.right_key)) {
                            out.push((
                                combine(j, arity, &l.binding, &r.binding),
                                l.poly.mul(&r.poly),
                            ));
                        }
                    }
                }
                out
            }
        };
        let node = &mut plan.nodes[n];
        node.table.clear();
        for (b, p) in rows {
            node.table.add(&b, &p);
        }
        node.materialized = true;
    }
}

type DeltaRows = HashMap<Box<[NodeId]>, Polynomial>;

/// Propagates the insertion of `e` (already in the store) bottom-up and
/// applies the resulting deltas. Only nodes mentioning the edge's predicate
/// are visited.
pub fn delta_insert(plan: &mut GlobalPlan, e: &Edge) -> HashMap<usize, ResultDelta> {
    let order = plan.nodes_with_predicate(e.predicate).to_vec();
    let mut deltas: HashMap<usize, DeltaRows> = HashMap::new();
    for &n in &order {
        let node = &plan.nodes[n];
        let arity = node.arity();
        let mut d: DeltaRows = HashMap::new();
        match &node.join {
            None => {
                if let Some(b) = leaf_binding(&node.patterns[0], arity, e) {
                    d.insert(b.into_boxed_slice(), Polynomial::symbol(e.id));
                }
            }
            Some(j) => {
                let (lt, rt) = (&plan.nodes[j.left].table, &plan.nodes[j.right].table);
                let (dl, dr) = (deltas.get(&j.left), deltas.get(&j.right));
                let mut push = |b: Box<[NodeId]>, p: Polynomial| {
                    d.entry(b).or_default().add_assign(&p);
                };
                if let Some(dl) = dl {
                    for (lb, lp) in dl {
                        for r in rt.probe(j.right_index, &key_of(lb, &j.left_key)) {
                            push(combine(j, arity, lb, &r.binding), lp.mul(&r.poly));
                        }
                    }
                }
                if let Some(dr) = dr {
                    for (rb, rp) in dr {
                        for l in lt.probe(j.left_index, &key_of(rb, &j.right_key)) {
                            push(combine(j, arity, &l.binding, rb), l.poly.mul(rp));
                        }
                    }
                }
                if let (Some(dl), Some(dr)) = (dl, dr) {
                    let mut by_key: HashMap<Vec<NodeId>, Vec<RowRef<'_>>> = HashMap::new();
                    for (rb, rp) in dr {
                        by_key
                            .entry(key_of(rb, &j.right_key))
                            .or_default()
                            .push((rb, rp));
                    }
                    for (lb, lp) in dl {
                        for (rb, rp) in by_key.get(&key_of(lb, &j.left_key)).into_iter().flatten() {
                            push(combine(j, arity, lb, rb), lp.mul(rp));
                        }
                    }
                }
            }
        }
        if !d.is_empty() {
            deltas.insert(n, d);
        }
    }
    let mut out = HashMap::new();
    for (n, d) in deltas {
        let table = &mut plan.nodes[n].table;
        let mut added = Vec::with_capacity(d.len());
        for (b, p) in d {
            table.add(&b, &p);
            added.push(BindingRow {
                bindings: b.into_vec(),
                provenance: p,
            });
        }
        out.insert(
            n,
            ResultDelta {
                added,
                removed: Vec::new(),
            },
        );
    }
    out
}

/// Prunes `e` (already removed from the store) from every plan table.
///
/// Affected rows come straight from each table's edge index.
pub fn delta_delete(plan: &mut GlobalPlan, e: &Edge) -> HashMap<usize, ResultDelta> {
    let mut out = HashMap::new();
    for n in plan.nodes_with_predicate(e.predicate).to_vec() {
        let removed: Vec<RowChange> = plan.nodes[n]
            .table
            .prune_edge(e.id)
            .into_iter()
            .map(|(b, pruned, row_removed)| RowChange {
                bindings: b.into_vec(),
                pruned,
                row_removed,
            })
            .collect();
        if !removed.is_empty() {
            out.insert(
                n,
                ResultDelta {
                    added: Vec::new(),
                    removed,
                },
            );
        }
    }
    out
}
