use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use super::workload::Update;
use crate::eval::evaluate_patterns;
use crate::provenance::Polynomial;
use crate::query::QueryGraph;
use crate::store::{Edge, KnowledgeGraph, NodeId, PredicateId};

/// Baseline that re-runs every query using the updated predicate.
#[derive(Debug, Clone, Default)]
pub struct NaiveBaseline {
    graph: KnowledgeGraph,
    queries: Vec<QueryGraph>,
    answers: Vec<BTreeMap<Vec<NodeId>, Polynomial>>,
    by_predicate: HashMap<PredicateId, Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct NaiveReport {
    pub edge: Option<Edge>,
    pub reevaluated: usize,
    pub total: Duration,
}

impl NaiveBaseline {
    pub fn new(graph: KnowledgeGraph) -> Self {
        NaiveBaseline {
            graph,
            ..Default::default()
        }
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn dictionary_mut(&mut self) -> &mut crate::store::Dictionary {
        self.graph.dictionary_mut()
    }

    pub fn register(&mut self, q: QueryGraph) -> usize {
        let id = self.queries.len();
        let mut preds: Vec<PredicateId> =
            q.patterns.iter().filter_map(|t| t.predicate_id()).collect();
        preds.sort();
        preds.dedup();
        for p in preds {
            self.by_predicate.entry(p).or_default().push(id);
        }
        self.answers.push(evaluate_patterns(
            &q.patterns,
            q.var_count(),
            &q.projection,
            &self.graph,
        ));
        self.queries.push(q);
        id
    }

    pub fn query_count(&self) -> usize {
        self.queries.len()
    }

    pub fn answers(&self, q: usize) -> &BTreeMap<Vec<NodeId>, Polynomial> {
        &self.answers[q]
    }

    pub fn apply(&mut self, update: &Update) -> NaiveReport {
        let start = Instant::now();
        let edge = match update {
            Update::Insert {
                subject,
                predicate,
                object,
            } => {
                let id = self.graph.insert_triple(subject, predicate, object);
                self.graph.edge(id).copied()
            }
            Update::DeleteId(id) => self.graph.delete_edge(*id),
            Update::DeleteTriple {
                subject,
                predicate,
                object,
            } => {
                let d = self.graph.dictionary();
                let id = match (d.node(subject), d.predicate(predicate), d.node(object)) {
                    (Some(s), Some(p), Some(o)) => self
                        .graph
                        .lookup(Some(s), Some(p), Some(o))
                        .map(|e| e.id)
                        .min(),
                    _ => None,
                };
                id.and_then(|id| self.graph.delete_edge(id))
            }
        };
        let mut reevaluated = 0;
        if let Some(e) = edge {
            for &q in self.by_predicate.get(&e.predicate).into_iter().flatten() {
                let qg = &self.queries[q];
                self.answers[q] =
                    evaluate_patterns(&qg.patterns, qg.var_count(), &qg.projection, &self.graph);
                reevaluated += 1;
            }
        }
        NaiveReport {
            edge,
            reevaluated,
            total: start.elapsed(),
        }
    }
}
