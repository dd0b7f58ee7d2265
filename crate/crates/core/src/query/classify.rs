use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::{QueryGraph, Term};
use crate::store::{NodeId, PredicateId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PredicateFlags {
    pub one_to_one: bool,
    pub asymmetric: bool,
}

/// Per-predicate semantic hints. Unknown predicates carry no flags.
#[derive(Debug, Clone, Default)]
pub struct PredicateMetadata {
    flags: HashMap<PredicateId, PredicateFlags>,
}

impl PredicateMetadata {
    pub fn set(&mut self, p: PredicateId, flags: PredicateFlags) {
        self.flags.insert(p, flags);
    }

    pub fn get(&self, p: PredicateId) -> PredicateFlags {
        self.flags.get(&p).copied().unwrap_or_default()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Patterns of one predicate that may bind the same edge, with the ordinal
/// whose removal yields the designated trigger subquery.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SharedGroup {
    pub predicate: PredicateId,
    pub members: Vec<usize>,
    pub trigger: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Classification {
    Regular,
    MultiMap(Vec<SharedGroup>),
}

impl Classification {
    pub fn is_multimap(&self) -> bool {
        matches!(self, Classification::MultiMap(_))
    }

    pub fn groups(&self) -> &[SharedGroup] {
        match self {
            Classification::Regular => &[],
            Classification::MultiMap(g) => g,
        }
    }

    /// Whether pattern `ordinal` belongs to some surviving group.
    pub fn in_group(&self, ordinal: usize) -> bool {
        self.groups().iter().any(|g| g.members.contains(&ordinal))
    }
}

struct Unifier {
    parent: Vec<usize>,
    constant: Vec<Option<NodeId>>,
}

impl Unifier {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges two classes; false on a clash of distinct constants.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return true;
        }
        match (self.constant[a], self.constant[b]) {
            (Some(x), Some(y)) if x != y => return false,
            (None, c) => self.constant[a] = c,
            _ => {}
        }
        self.parent[b] = a;
        true
    }
}

/// Whether patterns `i` and `j` of `q` can be mapped to one edge by a single
/// match of the whole query.
///
/// Unifies the two patterns' endpoints, closes the equalities under the
/// one-to-one predicates and rejects clashing constants. A directed cycle of
/// one asymmetric predicate after unification also rules the pair out.
pub fn can_co_bind(q: &QueryGraph, meta: &PredicateMetadata, i: usize, j: usize) -> bool {
    let (ti, tj) = (&q.patterns[i], &q.patterns[j]);
    if ti.predicate_id().is_none() || ti.predicate_id() != tj.predicate_id() {
        return false;
    }
    let nv = q.var_count();
    let mut consts: Vec<NodeId> = Vec::new();
    let mut slot = |t: Term<NodeId>| -> usize {
        match t {
            Term::Var(v) => v as usize,
            Term::Const(c) => {
                nv + consts.iter().position(|&x| x == c).unwrap_or_else(|| {
                    consts.push(c);
                    consts.len() - 1
                })
            }
        }
    };
    let ends: Vec<(usize, Option<PredicateId>, usize)> = q
        .patterns
        .iter()
        .map(|t| (slot(t.subject), t.predicate_id(), slot(t.object)))
        .collect();
    let total = nv + consts.len();
    let mut u = Unifier {
        parent: (0..total).collect(),
        constant: (0..total)
            .map(|k| if k >= nv { Some(consts[k - nv]) } else { None })
            .collect(),
    };
    if !u.union(ends[i].0, ends[j].0) || !u.union(ends[i].2, ends[j].2) {
        return false;
    }

    // Congruence closure over one-to-one predicates.
    let functional: Vec<usize> = (0..ends.len())
        .filter(|&k| ends[k].1.is_some_and(|p| meta.get(p).one_to_one))
        .collect();
    loop {
        let mut changed = false;
        for (x, &a) in functional.iter().enumerate() {
            for &b in &functional[x + 1..] {
                if ends[a].1 != ends[b].1 {
                    continue;
                }
                let same_s = u.find(ends[a].0) == u.find(ends[b].0);
                let same_o = u.find(ends[a].2) == u.find(ends[b].2);
                if same_s != same_o {
                    let ok = if same_s {
                        u.union(ends[a].2, ends[b].2)
                    } else {
                        u.union(ends[a].0, ends[b].0)
                    };
                    if !ok {
                        return false;
                    }
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Directed cycles of a single asymmetric predicate.
    let mut by_pred: BTreeMap<PredicateId, Vec<(usize, usize)>> = BTreeMap::new();
    for &(s, p, o) in &ends {
        if let Some(p) = p.filter(|&p| meta.get(p).asymmetric) {
            let (s, o) = (u.find(s), u.find(o));
            by_pred.entry(p).or_default().push((s, o));
        }
    }
    !by_pred.values().any(|arcs| has_cycle(arcs))
}

fn has_cycle(arcs: &[(usize, usize)]) -> bool {
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in arcs {
        adj.entry(a).or_default().push(b);
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: HashMap<usize, u8> = HashMap::new();
    fn dfs(n: usize, adj: &BTreeMap<usize, Vec<usize>>, state: &mut HashMap<usize, u8>) -> bool {
        state.insert(n, 1);
        for &m in adj.get(&n).map(Vec::as_slice).unwrap_or(&[]) {
            match state.get(&m).copied().unwrap_or(0) {
                1 => return true,
                0 if dfs(m, adj, state) => return true,
                _ => {}
            }
        }
        state.insert(n, 2);
        false
    }
    let starts: Vec<usize> = adj.keys().copied().collect();
    starts
        .into_iter()
        .any(|n| state.get(&n).copied().unwrap_or(0) == 0 && dfs(n, &adj, &mut state))
}

/// Regular, or MultiMap with the surviving groups of co-bindable patterns.
pub fn classify_query(q: &QueryGraph, meta: &PredicateMetadata) -> Classification {
    let n = q.len();
    let mut groups = Vec::new();
    let mut seen = vec![false; n];
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let Some(p) = q.patterns[i].predicate_id() else {
            continue;
        };
        let same: Vec<usize> = (i..n)
            .filter(|&k| q.patterns[k].predicate_id() == Some(p))
            .collect();
        for &k in &same {
            seen[k] = true;
        }
        // Connected components of the co-binding relation within `same`.
        let mut comp: Vec<usize> = (0..same.len()).collect();
        for a in 0..same.len() {
            for b in a + 1..same.len() {
                if can_co_bind(q, meta, same[a], same[b]) {
                    let (ra, rb) = (comp[a], comp[b]);
                    for c in comp.iter_mut() {
                        if *c == rb {
                            *c = ra;
                        }
                    }
                }
            }
        }
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, &r) in comp.iter().enumerate() {
            by_root.entry(r).or_default().push(same[k]);
        }
        for members in by_root.into_values().filter(|m| m.len() >= 2) {
            groups.push(SharedGroup {
                predicate: p,
                trigger: members[0],
                members,
            });
        }
    }
    if groups.is_empty() {
        Classification::Regular
    } else {
        groups.sort_by_key(|g| g.trigger);
        Classification::MultiMap(groups)
    }
}
