use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use super::andor::LocalPlan;
use crate::eval::Table;
use crate::query::{canonicalize_patterns, CanonicalForm, Term, TriplePattern, VarId};
use crate::store::PredicateId;

/// How a plan node is derived from two children. Maps send child columns to
/// parent columns; the key lists the shared parent columns.
#[derive(Debug, Clone, Serialize)]
pub struct Join {
    pub left: usize,
    pub right: usize,
    pub left_map: Vec<usize>,
    pub right_map: Vec<usize>,
    pub key: Vec<usize>,
    pub left_key: Vec<usize>,
    pub right_key: Vec<usize>,
    pub left_index: usize,
    pub right_index: usize,
}

#[derive(Debug, Clone)]
pub struct PlanNode {
    pub form: CanonicalForm,
    /// The expression over canonical variables `0..arity`, in canonical order.
    pub patterns: Vec<TriplePattern>,
    pub join: Option<Join>,
    pub predicates: BTreeSet<PredicateId>,
    pub estimate: f64,
    pub table: Table,
    pub materialized: bool,
}

impl PlanNode {
    pub fn arity(&self) -> usize {
        self.form.var_count as usize
    }

    pub fn is_leaf(&self) -> bool {
        self.join.is_none()
    }
}

/// Which registered subquery component a root serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RootLabel {
    pub query: usize,
    pub removed: usize,
    pub side: u8,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanRoot {
    pub label: RootLabel,
    pub node: usize,
}

#[derive(Debug, Clone)]
pub struct MergeOutcome {
    pub node: usize,
    /// Query variable to root column.
    pub renaming: HashMap<VarId, u32>,
    pub created: Vec<usize>,
    pub local_nodes: usize,
}

/// Shared DAG of plan expressions, one node per canonical form.
#[derive(Debug, Clone, Default)]
pub struct GlobalPlan {
    pub(crate) nodes: Vec<PlanNode>,
    by_form: HashMap<CanonicalForm, usize>,
    parents: Vec<Vec<usize>>,
    roots: Vec<PlanRoot>,
    topo: Vec<usize>,
    by_predicate: HashMap<PredicateId, Vec<usize>>,
}

fn rename(t: &TriplePattern, ren: &HashMap<VarId, u32>, ordinal: usize) -> TriplePattern {
    let n = |x: Term<_>| match x {
        Term::Var(v) => Term::Var(ren[&v]),
        c => c,
    };
    let p = match t.predicate {
        Term::Var(v) => Term::Var(ren[&v]),
        c => c,
    };
    TriplePattern {
        subject: n(t.subject),
        predicate: p,
        object: n(t.object),
        ordinal,
    }
}

impl GlobalPlan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[PlanNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &PlanNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn roots(&self) -> &[PlanRoot] {
        &self.roots
    }

    pub fn parents(&self, id: usize) -> &[usize] {
        &self.parents[id]
    }

    pub fn find(&self, form: &CanonicalForm) -> Option<usize> {
        self.by_form.get(form).copied()
    }

    /// Node ids with children before parents.
    pub fn topological(&self) -> &[usize] {
        &self.topo
    }

    /// Nodes whose expression mentions `p`, children before parents.
    pub fn nodes_with_predicate(&self, p: PredicateId) -> &[usize] {
        self.by_predicate.get(&p).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn non_leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_leaf()).count()
    }

    pub fn predicates(&self) -> BTreeSet<PredicateId> {
        self.nodes
            .iter()
            .flat_map(|n| n.predicates.iter().copied())
            .collect()
    }

    /// Links `local` into the DAG top-down. A node whose canonical form is
    /// already present is reused together with its existing derivation.
    pub fn merge(&mut self, local: &LocalPlan, label: RootLabel) -> MergeOutcome {
        let canon: Vec<_> = local
            .nodes
            .iter()
            .map(|n| {
                let subset = local.subset(n.mask);
                let c = canonicalize_patterns(&subset, &[]);
                (subset, c)
            })
            .collect();
        let mut global_of: Vec<Option<usize>> = vec![None; local.nodes.len()];
        let mut created_local = Vec::new();
        let mut created = Vec::new();
        let mut queue = VecDeque::from([local.root]);
        while let Some(l) = queue.pop_front() {
            if global_of[l].is_some() {
                continue;
            }
            let (subset, c) = &canon[l];
            if let Some(&g) = self.by_form.get(&c.form) {
                global_of[l] = Some(g);
                continue;
            }
            let patterns: Vec<TriplePattern> = c
                .order
                .iter()
                .enumerate()
                .map(|(k, &i)| rename(&subset[i], &c.renaming, k))
                .collect();
            let id = self.nodes.len();
            self.nodes.push(PlanNode {
                form: c.form.clone(),
                predicates: patterns
                    .iter()
                    .filter_map(TriplePattern::predicate_id)
                    .collect(),
                patterns,
                join: None,
                estimate: local.nodes[l].estimate,
                table: Table::new(c.form.var_count as usize),
                materialized: false,
            });
            self.parents.push(Vec::new());
            self.by_form.insert(c.form.clone(), id);
            global_of[l] = Some(id);
            created_local.push(l);
            created.push(id);
            if let Some((a, b)) = local.nodes[l].children {
                queue.push_back(a);
                queue.push_back(b);
            }
        }
        for &l in &created_local {
            let Some((a, b)) = local.nodes[l].children else {
                continue;
            };
            let g = global_of[l].unwrap();
            let (ga, gb) = (global_of[a].unwrap(), global_of[b].unwrap());
            let ren = &canon[l].1.renaming;
            let map_of = |child: usize| -> Vec<usize> {
                let cren = &canon[child].1.renaming;
                let mut m = vec![0; cren.len()];
                for (v, &c) in cren {
                    m[c as usize] = ren[v] as usize;
                }
                m
            };
            let (left_map, right_map) = (map_of(a), map_of(b));
            let key: Vec<usize> = {
                let mut k: Vec<usize> = left_map
                    .iter()
                    .copied()
                    .filter(|c| right_map.contains(c))
                    .collect();
                k.sort_unstable();
                k
            };
            let pos = |m: &[usize], col: usize| m.iter().position(|&x| x == col).unwrap();
            let left_key: Vec<usize> = key.iter().map(|&k| pos(&left_map, k)).collect();
            let right_key: Vec<usize> = key.iter().map(|&k| pos(&right_map, k)).collect();
            let left_index = self.nodes[ga].table.ensure_index(&left_key);
            let right_index = self.nodes[gb].table.ensure_index(&right_key);
            self.nodes[g].join = Some(Join {
                left: ga,
                right: gb,
                left_map,
                right_map,
                key,
                left_key,
                right_key,
                left_index,
                right_index,
            });
            self.parents[ga].push(g);
            if gb != ga {
                self.parents[gb].push(g);
            }
        }
        let root = global_of[local.root].unwrap();
        self.roots.push(PlanRoot { label, node: root });
        self.reindex();
        MergeOutcome {
            node: root,
            renaming: canon[local.root].1.renaming.clone(),
            created,
            local_nodes: local.nodes.len(),
        }
    }

    fn reindex(&mut self) {
        let mut state = vec![false; self.nodes.len()];
        let mut topo = Vec::with_capacity(self.nodes.len());
        fn visit(n: usize, nodes: &[PlanNode], state: &mut [bool], topo: &mut Vec<usize>) {
            if state[n] {
                return;
            }
            state[n] = true;
            if let Some(j) = &nodes[n].join {
                visit(j.left, nodes, state, topo);
                visit(j.right, nodes, state, topo);
            }
            topo.push(n);
        }
        for n in 0..self.nodes.len() {
            visit(n, &self.nodes, &mut state, &mut topo);
        }
        let mut by_predicate: HashMap<PredicateId, Vec<usize>> = HashMap::new();
        for &n in &topo {
            for &p in &self.nodes[n].predicates {
                by_predicate.entry(p).or_default().push(n);
            }
        }
        self.topo = topo;
        self.by_predicate = by_predicate;
    }
}

/// Non-leaf plan nodes per distinct predicate; `None` without predicates.
pub fn coverage(plan: &GlobalPlan) -> Option<f64> {
    coverage_over(plan, plan.predicates().len())
}

/// Coverage against an externally counted predicate set.
pub fn coverage_over(plan: &GlobalPlan, predicates: usize) -> Option<f64> {
    (predicates > 0).then(|| plan.non_leaf_count() as f64 / predicates as f64)
}
