use std::collections::BTreeMap;

use kgprov_core::{EdgeId, KnowledgeGraph, NodeId, PredicateId};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Insert(u32, u32, u32),
    /// Index into the live edges, modulo their count.
    Delete(usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0u32..6, 0u32..3, 0u32..6).prop_map(|(s, p, o)| Op::Insert(s, p, o)),
        1 => any::<usize>().prop_map(Op::Delete),
    ]
}

fn setup() -> (KnowledgeGraph, Vec<NodeId>, Vec<PredicateId>) {
    let mut g = KnowledgeGraph::new();
    let nodes = (0..6)
        .map(|i| g.dictionary_mut().intern_node(&format!("n{i}")))
        .collect();
    let preds = (0..3)
        .map(|i| g.dictionary_mut().intern_predicate(&format!("p{i}")))
        .collect();
    (g, nodes, preds)
}

proptest! {
    #[test]
    fn lookup_matches_a_scan(ops in prop::collection::vec(op(), 0..60)) {
        let (mut g, nodes, preds) = setup();
        let mut model: BTreeMap<EdgeId, (NodeId, PredicateId, NodeId)> = BTreeMap::new();
        let mut last: Option<EdgeId> = None;
        for op in ops {
            match op {
                Op::Insert(s, p, o) => {
                    let t = (nodes[s as usize], preds[p as usize], nodes[o as usize]);
                    let id = g.insert_edge(t.0, t.1, t.2);
                    prop_assert!(last.is_none_or(|l| id > l));
                    last = Some(id);
                    model.insert(id, t);
                    prop_assert!(g.lookup(Some(t.0), Some(t.1), Some(t.2)).any(|e| e.id == id));
                }
                Op::Delete(k) => {
                    if model.is_empty() {
                        continue;
                    }
                    let id = *model.keys().nth(k % model.len()).unwrap();
                    let (s, p, o) = model.remove(&id).unwrap();
                    let e = g.delete_edge(id).unwrap();
                    prop_assert_eq!((e.subject, e.predicate, e.object), (s, p, o));
                    prop_assert!(g.delete_edge(id).is_none());
                    prop_assert!(!g.lookup(Some(s), Some(p), Some(o)).any(|e| e.id == id));
                }
            }
            prop_assert_eq!(g.edge_count(), model.len());
            let vs: Vec<NodeId> = g.vertices().collect();
            prop_assert!(vs.windows(2).all(|w| w[0] < w[1]));
            let ps: Vec<PredicateId> = g.predicates().collect();
            prop_assert!(ps.windows(2).all(|w| w[0] < w[1]));
            for s in nodes.iter().map(Some).chain([None]) {
                for p in preds.iter().map(Some).chain([None]) {
                    for o in nodes.iter().map(Some).chain([None]) {
                        let mut got: Vec<EdgeId> = g.lookup(s.copied(), p.copied(), o.copied()).map(|e| e.id).collect();
                        got.sort();
                        let want: Vec<EdgeId> = model
                            .iter()
                            .filter(|(_, t)| s.is_none_or(|x| *x == t.0) && p.is_none_or(|x| *x == t.1) && o.is_none_or(|x| *x == t.2))
                            .map(|(id, _)| *id)
                            .collect();
                        prop_assert_eq!(got, want);
                    }
                }
            }
        }
    }
}
