use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::query::{Term, TriplePattern, VarId};
use crate::store::{KnowledgeGraph, NodeId, PredicateId};

/// Index into [`StatsCatalog::sets`].
pub type CsId = usize;

/// Characteristic-set and characteristic-pair statistics of a graph snapshot.
#[derive(Debug, Clone, Default)]
pub struct StatsCatalog {
    sets: Vec<BTreeSet<PredicateId>>,
    set_ids: HashMap<BTreeSet<PredicateId>, CsId>,
    node_cs: HashMap<NodeId, CsId>,
    /// Number of nodes whose characteristic set is `sets[i]`.
    subjects: Vec<usize>,
    /// Distinct (s, o) pairs keyed by (cs(s), cs(o), p).
    pairs: HashMap<(CsId, CsId, PredicateId), usize>,
    predicate_edges: HashMap<PredicateId, usize>,
    sp_edges: HashMap<(NodeId, PredicateId), usize>,
    po_edges: HashMap<(PredicateId, NodeId), usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsSummary {
    pub characteristic_sets: usize,
    pub characteristic_pairs: usize,
    pub predicates: usize,
    pub edges: usize,
}

impl StatsCatalog {
    fn intern(&mut self, set: BTreeSet<PredicateId>) -> CsId {
        if let Some(&id) = self.set_ids.get(&set) {
            return id;
        }
        let id = self.sets.len();
        self.sets.push(set.clone());
        self.subjects.push(0);
        self.set_ids.insert(set, id);
        id
    }

    pub fn set(&self, id: CsId) -> &BTreeSet<PredicateId> {
        &self.sets[id]
    }

    pub fn sets(&self) -> impl Iterator<Item = (CsId, &BTreeSet<PredicateId>)> + '_ {
        self.sets.iter().enumerate()
    }

    /// Characteristic set of `n`; nodes without outgoing edges have the empty set.
    pub fn characteristic_set(&self, n: NodeId) -> Option<&BTreeSet<PredicateId>> {
        self.node_cs.get(&n).map(|&i| &self.sets[i])
    }

    pub fn pair_counts(&self) -> impl Iterator<Item = ((CsId, CsId, PredicateId), usize)> + '_ {
        self.pairs.iter().map(|(&k, &v)| (k, v))
    }

    pub fn predicate_edges(&self, p: PredicateId) -> usize {
        self.predicate_edges.get(&p).copied().unwrap_or(0)
    }

    pub fn summary(&self) -> StatsSummary {
        StatsSummary {
            characteristic_sets: self.sets.len(),
            characteristic_pairs: self.pairs.len(),
            predicates: self.predicate_edges.len(),
            edges: self.predicate_edges.values().sum(),
        }
    }

    /// Number of nodes whose characteristic set contains `preds`.
    pub fn star_count(&self, preds: &BTreeSet<PredicateId>) -> usize {
        self.sets
            .iter()
            .zip(&self.subjects)
            .filter(|(s, _)| preds.is_subset(s))
            .map(|(_, &c)| c)
            .sum()
    }

    /// Characteristic-pair instances for `p` between a subject covering
    /// `from` and an object covering `to`.
    pub fn pair_count(
        &self,
        from: &BTreeSet<PredicateId>,
        p: PredicateId,
        to: &BTreeSet<PredicateId>,
    ) -> usize {
        self.pairs
            .iter()
            .filter(|(&(cs, co, q), _)| {
                q == p && from.is_subset(&self.sets[cs]) && to.is_subset(&self.sets[co])
            })
            .map(|(_, &c)| c)
            .sum()
    }

    /// Exact edge count for one pattern, using its constants.
    pub fn pattern_count(&self, t: &TriplePattern) -> usize {
        let Some(p) = t.predicate_id() else {
            return self.predicate_edges.values().sum();
        };
        match (t.subject, t.object) {
            (Term::Const(s), _) => self.sp_edges.get(&(s, p)).copied().unwrap_or(0),
            (_, Term::Const(o)) => self.po_edges.get(&(p, o)).copied().unwrap_or(0),
            _ => self.predicate_edges(p),
        }
    }
}

/// Scans the graph once and builds the catalog.
pub fn compute_statistics(g: &KnowledgeGraph) -> StatsCatalog {
    let mut out_preds: HashMap<NodeId, BTreeSet<PredicateId>> = HashMap::new();
    let mut stats = StatsCatalog::default();
    for e in g.edges() {
        out_preds.entry(e.subject).or_default().insert(e.predicate);
        out_preds.entry(e.object).or_default();
        *stats.predicate_edges.entry(e.predicate).or_default() += 1;
        *stats.sp_edges.entry((e.subject, e.predicate)).or_default() += 1;
        *stats.po_edges.entry((e.predicate, e.object)).or_default() += 1;
    }
    let mut nodes: Vec<NodeId> = out_preds.keys().copied().collect();
    nodes.sort_unstable();
    for n in nodes {
        let id = stats.intern(out_preds.remove(&n).unwrap());
        stats.subjects[id] += 1;
        stats.node_cs.insert(n, id);
    }
    let mut seen: BTreeSet<(NodeId, PredicateId, NodeId)> = BTreeSet::new();
    for e in g.edges() {
        if seen.insert((e.subject, e.predicate, e.object)) {
            let key = (
                stats.node_cs[&e.subject],
                stats.node_cs[&e.object],
                e.predicate,
            );
            *stats.pairs.entry(key).or_default() += 1;
        }
    }
    stats
}

struct Star {
    subject: Term<NodeId>,
    preds: BTreeSet<PredicateId>,
}

/// Star-chain cardinality estimate for a connected pattern set.
///
/// Patterns are grouped into subject stars in the order given (callers pass
/// canonical order). The chain visits stars preferring one linked to the
/// last star. Each linked step adds its characteristic-pair count, an
/// unlinked step adds the star count of the new star, and each link left
/// over from the spanning chain halves the result.
pub fn estimate_cardinality(patterns: &[TriplePattern], stats: &StatsCatalog) -> f64 {
    match patterns {
        [] => return 0.0,
        [t] => return stats.pattern_count(t) as f64,
        _ => {}
    }
    let mut stars: Vec<Star> = Vec::new();
    for t in patterns {
        let Some(p) = t.predicate_id() else { continue };
        match stars.iter_mut().find(|s| s.subject == t.subject) {
            Some(s) => {
                s.preds.insert(p);
            }
            None => stars.push(Star {
                subject: t.subject,
                preds: BTreeSet::from([p]),
            }),
        }
    }
    if stars.len() == 1 {
        return stats.star_count(&stars[0].preds) as f64;
    }

    // Links between stars: a pattern of star a whose object is star b's subject.
    let star_of = |term: Term<NodeId>| stars.iter().position(|s| s.subject == term);
    let mut links: Vec<(usize, PredicateId, usize)> = Vec::new();
    for t in patterns {
        if let (Some(a), Some(b), Some(p)) =
            (star_of(t.subject), star_of(t.object), t.predicate_id())
        {
            if a != b {
                links.push((a, p, b));
            }
        }
    }

    let mut visited = vec![false; stars.len()];
    let mut chain = vec![0usize];
    visited[0] = true;
    let mut used = 0usize;
    let mut card = 0.0;
    while chain.len() < stars.len() {
        let last = *chain.last().unwrap();
        let linked_to = |from: usize, visited: &[bool]| {
            links
                .iter()
                .filter_map(|&(a, p, b)| {
                    if a == from && !visited[b] {
                        Some((b, p, true))
                    } else if b == from && !visited[a] {
                        Some((a, p, false))
                    } else {
                        None
                    }
                })
                .min_by_key(|&(s, _, _)| s)
        };
        let step = linked_to(last, &visited).map(|x| (last, x)).or_else(|| {
            chain
                .iter()
                .find_map(|&c| linked_to(c, &visited).map(|x| (c, x)))
        });
        match step {
            Some((from, (next, p, forward))) => {
                let count = if forward {
                    stats.pair_count(&stars[from].preds, p, &stars[next].preds)
                } else {
                    stats.pair_count(&stars[next].preds, p, &stars[from].preds)
                };
                card += count as f64;
                used += 1;
                visited[next] = true;
                chain.push(next);
            }
            None => {
                let next = (0..stars.len()).find(|&i| !visited[i]).unwrap();
                card += stats.star_count(&stars[next].preds) as f64;
                visited[next] = true;
                chain.push(next);
            }
        }
    }
    let closing = links.len().saturating_sub(used);
    card * 0.5f64.powi(closing as i32)
}

/// Variables of a pattern set, ascending.
pub fn vars_of(patterns: &[TriplePattern]) -> Vec<VarId> {
    let mut v: Vec<VarId> = patterns.iter().flat_map(TriplePattern::vars).collect();
    v.sort_unstable();
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_query;
    use crate::store::Dictionary;

    fn fig1() -> KnowledgeGraph {
        let mut g = KnowledgeGraph::new();
        crate::ntriples::load_str(
            &mut g,
            include_str!("../../../../fixtures/running_example.nt"),
        )
        .unwrap();
        g
    }

    #[test]
    fn empty_graph() {
        let s = compute_statistics(&KnowledgeGraph::new());
        assert_eq!(s.summary().characteristic_sets, 0);
        let mut d = Dictionary::default();
        let q = parse_query("SELECT * WHERE { ?a p ?b . ?b q ?c }", &mut d).unwrap();
        assert_eq!(estimate_cardinality(&q.patterns, &s), 0.0);
    }

    #[test]
    fn running_example_sets() {
        let g = fig1();
        let s = compute_statistics(&g);
        let d = g.dictionary();
        let cs = s.characteristic_set(d.node("Sarawagi").unwrap()).unwrap();
        for p in ["coAuthor", "hasDegree", "hadAdvisor"] {
            assert!(cs.contains(&d.predicate(p).unwrap()));
        }
        assert_eq!(s.predicate_edges(d.predicate("hadAdvisor").unwrap()), 5);
    }

    #[test]
    fn single_pattern_is_exact() {
        let mut g = fig1();
        let s = compute_statistics(&g);
        let q = parse_query("SELECT * WHERE { ?x hadAdvisor ?y }", g.dictionary_mut()).unwrap();
        assert_eq!(estimate_cardinality(&q.patterns, &s), 5.0);
        let q = parse_query(
            "SELECT * WHERE { ?x hadAdvisor Stonebraker }",
            g.dictionary_mut(),
        )
        .unwrap();
        assert_eq!(estimate_cardinality(&q.patterns, &s), 3.0);
    }
}
