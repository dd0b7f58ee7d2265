//! In-memory knowledge graph: a directed, labeled multigraph whose edges carry
//! unique, never-reused identifiers.
//!
//! Names are interned into dense ids. Every access pattern of a triple pattern
//! is served by one of five indexes (SP, PO, P, S, O); only the all-wildcard
//! lookup walks the edge table.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Interned entity or literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

/// Interned relation label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PredicateId(pub u32);

/// Edge identifier. Assigned from a monotone counter starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub u64);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub subject: NodeId,
    pub predicate: PredicateId,
    pub object: NodeId,
}

#[derive(Debug, Clone, Default)]
struct Interner {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }
}

/// Bidirectional name dictionary for nodes and predicates.
#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    nodes: Interner,
    predicates: Interner,
}

impl Dictionary {
    pub fn intern_node(&mut self, name: &str) -> NodeId {
        NodeId(self.nodes.intern(name))
    }

    pub fn intern_predicate(&mut self, name: &str) -> PredicateId {
        PredicateId(self.predicates.intern(name))
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.nodes.get(name).map(NodeId)
    }

    pub fn predicate(&self, name: &str) -> Option<PredicateId> {
        self.predicates.get(name).map(PredicateId)
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        self.nodes.name(id.0)
    }

    pub fn predicate_name(&self, id: PredicateId) -> &str {
        self.predicates.name(id.0)
    }
}

/// Bound-or-wildcard selector for [`KnowledgeGraph::lookup`].
pub type Slot<T> = Option<T>;

#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    dict: Dictionary,
    // Indexed by EdgeId; slot 0 is never used.
    edges: Vec<Option<Edge>>,
    live: usize,
    by_sp: HashMap<(NodeId, PredicateId), BTreeSet<EdgeId>>,
    by_po: HashMap<(PredicateId, NodeId), BTreeSet<EdgeId>>,
    by_p: HashMap<PredicateId, BTreeSet<EdgeId>>,
    by_s: HashMap<NodeId, BTreeSet<EdgeId>>,
    by_o: HashMap<NodeId, BTreeSet<EdgeId>>,
    degree: HashMap<NodeId, usize>,
}

fn index_add<K: std::hash::Hash + Eq>(map: &mut HashMap<K, BTreeSet<EdgeId>>, key: K, id: EdgeId) {
    map.entry(key).or_default().insert(id);
}

fn index_remove<K: std::hash::Hash + Eq>(
    map: &mut HashMap<K, BTreeSet<EdgeId>>,
    key: K,
    id: EdgeId,
) {
    if let Some(set) = map.get_mut(&key) {
        set.remove(&id);
        if set.is_empty() {
            map.remove(&key);
        }
    }
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self {
            edges: vec![None],
            ..Default::default()
        }
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn dictionary_mut(&mut self) -> &mut Dictionary {
        &mut self.dict
    }

    /// Interns the three names and inserts the triple.
    pub fn insert_triple(&mut self, subject: &str, predicate: &str, object: &str) -> EdgeId {
        let s = self.dict.intern_node(subject);
        let p = self.dict.intern_predicate(predicate);
        let o = self.dict.intern_node(object);
        self.insert_edge(s, p, o)
    }

    /// Inserts a new edge. Duplicate triples are legal and get distinct ids.
    pub fn insert_edge(
        &mut self,
        subject: NodeId,
        predicate: PredicateId,
        object: NodeId,
    ) -> EdgeId {
        let id = EdgeId(self.edges.len() as u64);
        let edge = Edge {
            id,
            subject,
            predicate,
            object,
        };
        self.edges.push(Some(edge));
        self.live += 1;
        index_add(&mut self.by_sp, (subject, predicate), id);
        index_add(&mut self.by_po, (predicate, object), id);
        index_add(&mut self.by_p, predicate, id);
        index_add(&mut self.by_s, subject, id);
        index_add(&mut self.by_o, object, id);
        *self.degree.entry(subject).or_default() += 1;
        *self.degree.entry(object).or_default() += 1;
        id
    }

    /// Removes an edge; `None` when the id is unknown or already deleted.
    pub fn delete_edge(&mut self, id: EdgeId) -> Option<Edge> {
        let edge = self.edges.get_mut(id.0 as usize)?.take()?;
        self.live -= 1;
        index_remove(&mut self.by_sp, (edge.subject, edge.predicate), id);
        index_remove(&mut self.by_po, (edge.predicate, edge.object), id);
        index_remove(&mut self.by_p, edge.predicate, id);
        index_remove(&mut self.by_s, edge.subject, id);
        index_remove(&mut self.by_o, edge.object, id);
        for node in [edge.subject, edge.object] {
            if let Some(d) = self.degree.get_mut(&node) {
                *d -= 1;
                if *d == 0 {
                    self.degree.remove(&node);
                }
            }
        }
        Some(edge)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(id.0 as usize).and_then(Option::as_ref)
    }

    /// Identifier the next insertion will receive.
    pub fn next_edge_id(&self) -> EdgeId {
        EdgeId(self.edges.len() as u64)
    }

    pub fn edge_count(&self) -> usize {
        self.live
    }

    /// Nodes with at least one live incident edge.
    pub fn vertex_count(&self) -> usize {
        self.degree.len()
    }

    /// Predicates labelling at least one live edge.
    pub fn predicate_count(&self) -> usize {
        self.by_p.len()
    }

    /// Live vertices in id order.
    pub fn vertices(&self) -> impl Iterator<Item = NodeId> + '_ {
        let mut v: Vec<NodeId> = self.degree.keys().copied().collect();
        v.sort_unstable();
        v.into_iter()
    }

    /// Live predicates in id order.
    pub fn predicates(&self) -> impl Iterator<Item = PredicateId> + '_ {
        let mut v: Vec<PredicateId> = self.by_p.keys().copied().collect();
        v.sort_unstable();
        v.into_iter()
    }

    /// Live edges in id order.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter_map(Option::as_ref)
    }

    pub fn predicate_edge_count(&self, p: PredicateId) -> usize {
        self.by_p.get(&p).map_or(0, BTreeSet::len)
    }

    /// True when some edge links the two nodes in either direction.
    pub fn connected(&self, a: NodeId, b: NodeId) -> bool {
        let probe = |from: NodeId, to: NodeId| {
            self.by_s.get(&from).is_some_and(|ids| {
                ids.iter()
                    .any(|id| self.edges[id.0 as usize].unwrap().object == to)
            })
        };
        probe(a, b) || probe(b, a)
    }

    fn resolve<'a>(
        &'a self,
        set: Option<&'a BTreeSet<EdgeId>>,
    ) -> impl Iterator<Item = &'a Edge> + 'a {
        set.into_iter()
            .flatten()
            .map(move |id| self.edges[id.0 as usize].as_ref().unwrap())
    }

    /// All live edges matching every bound position, in id order.
    pub fn lookup(
        &self,
        subject: Slot<NodeId>,
        predicate: Slot<PredicateId>,
        object: Slot<NodeId>,
    ) -> Box<dyn Iterator<Item = &Edge> + '_> {
        let resolve = |set| self.resolve(set);
        match (subject, predicate, object) {
            (None, None, None) => Box::new(self.edges()),
            (Some(s), None, None) => Box::new(resolve(self.by_s.get(&s))),
            (None, Some(p), None) => Box::new(resolve(self.by_p.get(&p))),
            (None, None, Some(o)) => Box::new(resolve(self.by_o.get(&o))),
            (Some(s), Some(p), None) => Box::new(resolve(self.by_sp.get(&(s, p)))),
            (None, Some(p), Some(o)) => Box::new(resolve(self.by_po.get(&(p, o)))),
            (Some(s), None, Some(o)) => {
                Box::new(resolve(self.by_s.get(&s)).filter(move |e| e.object == o))
            }
            (Some(s), Some(p), Some(o)) => {
                Box::new(resolve(self.by_sp.get(&(s, p))).filter(move |e| e.object == o))
            }
        }
    }

    /// Number of edges a lookup would return, without materializing them when an
    /// index answers it directly.
    pub fn lookup_len(
        &self,
        subject: Slot<NodeId>,
        predicate: Slot<PredicateId>,
        object: Slot<NodeId>,
    ) -> usize {
        let len = |set: Option<&BTreeSet<EdgeId>>| set.map_or(0, BTreeSet::len);
        match (subject, predicate, object) {
            (None, None, None) => self.live,
            (Some(s), None, None) => len(self.by_s.get(&s)),
            (None, Some(p), None) => len(self.by_p.get(&p)),
            (None, None, Some(o)) => len(self.by_o.get(&o)),
            (Some(s), Some(p), None) => len(self.by_sp.get(&(s, p))),
            (None, Some(p), Some(o)) => len(self.by_po.get(&(p, o))),
            _ => self.lookup(subject, predicate, object).count(),
        }
    }

    /// Text form `<s> <p> <o>` of an edge.
    pub fn describe(&self, edge: &Edge) -> String {
        format!(
            "<{}> <{}> <{}>",
            self.dict.node_name(edge.subject),
            self.dict.predicate_name(edge.predicate),
            self.dict.node_name(edge.object)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids<'a>(it: impl Iterator<Item = &'a Edge>) -> Vec<u64> {
        it.map(|e| e.id.0).collect()
    }

    #[test]
    fn self_loop_on_empty_graph() {
        let mut g = KnowledgeGraph::new();
        let id = g.insert_triple("A", "p", "A");
        assert_eq!(id, EdgeId(1));
        assert_eq!(g.vertex_count(), 1);
        let a = g.dictionary().node("A").unwrap();
        assert_eq!(ids(g.lookup(Some(a), None, Some(a))), vec![1]);
    }

    #[test]
    fn duplicate_triples_get_distinct_ids() {
        let mut g = KnowledgeGraph::new();
        let a = g.insert_triple("a", "p", "b");
        let b = g.insert_triple("a", "p", "b");
        assert_ne!(a, b);
        let (s, p, o) = {
            let d = g.dictionary();
            (d.node("a"), d.predicate("p"), d.node("b"))
        };
        assert_eq!(ids(g.lookup(s, p, o)), vec![1, 2]);
        assert_eq!(g.lookup_len(s, p, None), 2);
    }

    #[test]
    fn delete_is_final_and_ids_are_not_reused() {
        let mut g = KnowledgeGraph::new();
        assert!(g.delete_edge(EdgeId(1)).is_none());
        let id = g.insert_triple("a", "p", "b");
        assert!(g.delete_edge(id).is_some());
        assert!(g.delete_edge(id).is_none());
        assert_eq!(g.lookup(None, None, None).count(), 0);
        assert_eq!(g.vertex_count(), 0);
        assert_eq!(g.predicate_count(), 0);
        assert_eq!(g.insert_triple("a", "p", "b"), EdgeId(2));
    }

    #[test]
    fn connected_checks_both_directions() {
        let mut g = KnowledgeGraph::new();
        g.insert_triple("a", "p", "b");
        let d = g.dictionary();
        let (a, b) = (d.node("a").unwrap(), d.node("b").unwrap());
        assert!(g.connected(a, b));
        assert!(g.connected(b, a));
        assert!(!g.connected(a, a));
    }
}
