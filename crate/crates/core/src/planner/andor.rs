use serde::Serialize;

use super::stats::{estimate_cardinality, StatsCatalog};
use crate::query::{canonicalize_patterns, CanonicalForm, TriplePattern};

/// Components up to this many patterns get a fully enumerated tree.
pub const EXHAUSTIVE_LIMIT: usize = 9;

/// Set of pattern positions within the tree's component.
pub type Mask = u32;

#[derive(Debug, Clone, Serialize)]
pub struct AndNode {
    pub left: Mask,
    pub right: Mask,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrNode {
    pub mask: Mask,
    pub derivations: Vec<AndNode>,
}

/// All binary-join derivations of one connected pattern set.
///
/// Above [`EXHAUSTIVE_LIMIT`] patterns the OR nodes are not enumerated and
/// plan selection expands left-deep candidates on demand.
#[derive(Debug, Clone, Serialize)]
pub struct AndOrTree {
    pub patterns: Vec<TriplePattern>,
    /// Ordered by size, then mask.
    pub or_nodes: Vec<OrNode>,
    pub exhaustive: bool,
}

impl AndOrTree {
    pub fn root_mask(&self) -> Mask {
        ((1u64 << self.patterns.len()) - 1) as Mask
    }

    pub fn or_node(&self, mask: Mask) -> Option<&OrNode> {
        self.or_nodes
            .binary_search_by_key(&(mask.count_ones(), mask), |o| {
                (o.mask.count_ones(), o.mask)
            })
            .ok()
            .map(|i| &self.or_nodes[i])
    }

    pub fn and_count(&self) -> usize {
        self.or_nodes.iter().map(|o| o.derivations.len()).sum()
    }

    pub fn subset(&self, mask: Mask) -> Vec<TriplePattern> {
        (0..self.patterns.len())
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| self.patterns[i])
            .collect()
    }
}

fn share(patterns: &[TriplePattern], a: Mask, b: Mask) -> bool {
    (0..patterns.len()).any(|i| {
        a & (1 << i) != 0
            && (0..patterns.len())
                .any(|j| b & (1 << j) != 0 && patterns[i].shares_var_with(&patterns[j]))
    })
}

fn connected(patterns: &[TriplePattern], mask: Mask) -> bool {
    if mask == 0 {
        return false;
    }
    let mut reached = mask & mask.wrapping_neg();
    loop {
        let next = (0..patterns.len())
            .filter(|&j| mask & (1 << j) != 0 && reached & (1 << j) == 0)
            .filter(|&j| share(patterns, reached, 1 << j))
            .fold(reached, |acc, j| acc | (1 << j));
        if next == reached {
            return reached == mask;
        }
        reached = next;
    }
}

/// Enumerates every connected subset and every split of it into two
/// connected, variable-sharing halves.
pub fn build_and_or_tree(patterns: &[TriplePattern]) -> AndOrTree {
    let m = patterns.len();
    assert!(m >= 1, "empty component");
    if m > EXHAUSTIVE_LIMIT {
        return AndOrTree {
            patterns: patterns.to_vec(),
            or_nodes: Vec::new(),
            exhaustive: false,
        };
    }
    let full: Mask = ((1u64 << m) - 1) as Mask;
    let mut or_nodes: Vec<OrNode> = (1..=full)
        .filter(|&mask| connected(patterns, mask))
        .map(|mask| {
            let low = mask & mask.wrapping_neg();
            let mut derivations = Vec::new();
            // Submasks holding the lowest bit, so each unordered split is seen once.
            let mut sub = (mask - 1) & mask;
            while sub != 0 {
                let other = mask ^ sub;
                if sub & low != 0
                    && other != 0
                    && connected(patterns, sub)
                    && connected(patterns, other)
                    && share(patterns, sub, other)
                {
                    derivations.push(AndNode {
                        left: sub,
                        right: other,
                    });
                }
                sub = (sub - 1) & mask;
            }
            derivations.sort_by_key(|a| (a.left.count_ones(), a.left));
            OrNode { mask, derivations }
        })
        .collect();
    or_nodes.sort_by_key(|o| (o.mask.count_ones(), o.mask));
    AndOrTree {
        patterns: patterns.to_vec(),
        or_nodes,
        exhaustive: true,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalNode {
    pub mask: Mask,
    /// Indices into [`LocalPlan::nodes`].
    pub children: Option<(usize, usize)>,
    pub estimate: f64,
}

/// A binary join tree over one component. Children precede parents.
#[derive(Debug, Clone, Serialize)]
pub struct LocalPlan {
    pub patterns: Vec<TriplePattern>,
    pub nodes: Vec<LocalNode>,
    pub root: usize,
}

impl LocalPlan {
    pub fn subset(&self, mask: Mask) -> Vec<TriplePattern> {
        (0..self.patterns.len())
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| self.patterns[i])
            .collect()
    }
}

/// Canonical-order estimate and form for a subset, used for ranking.
fn score(patterns: &[TriplePattern], mask: Mask, stats: &StatsCatalog) -> (f64, CanonicalForm) {
    let subset: Vec<TriplePattern> = (0..patterns.len())
        .filter(|&i| mask & (1 << i) != 0)
        .map(|i| patterns[i])
        .collect();
    let canon = canonicalize_patterns(&subset, &[]);
    let ordered: Vec<TriplePattern> = canon.order.iter().map(|&i| subset[i]).collect();
    (estimate_cardinality(&ordered, stats), canon.form)
}

/// Greedy bottom-up selection: the cheapest leaf first, then at each level
/// the cheapest parent formed by joining one more adjacent pattern. Ties go
/// to the smaller canonical form.
pub fn select_best_plan(tree: &AndOrTree, stats: &StatsCatalog) -> LocalPlan {
    let pats = &tree.patterns;
    let m = pats.len();
    let pick = |cands: Vec<Mask>| -> (Mask, f64) {
        cands
            .into_iter()
            .map(|mask| {
                let (est, form) = score(pats, mask, stats);
                (mask, est, form)
            })
            .min_by(|a, b| {
                a.1.total_cmp(&b.1)
                    .then_with(|| a.2.cmp(&b.2))
                    .then(a.0.cmp(&b.0))
            })
            .map(|(m, e, _)| (m, e))
            .expect("no candidate at a plan level")
    };
    let leaves: Vec<Mask> = (0..m).map(|i| 1 << i).collect();
    let (mut current, est) = pick(leaves);
    let mut nodes = vec![LocalNode {
        mask: current,
        children: None,
        estimate: est,
    }];
    let mut leaf_index: Vec<Option<usize>> = vec![None; m];
    leaf_index[current.trailing_zeros() as usize] = Some(0);
    let mut cur_idx = 0;
    while current.count_ones() as usize != m {
        let cands: Vec<Mask> = (0..m)
            .filter(|&j| current & (1 << j) == 0 && share(pats, current, 1 << j))
            .map(|j| current | (1 << j))
            .filter(|&mask| !tree.exhaustive || tree.or_node(mask).is_some())
            .collect();
        let (next, est) = pick(cands);
        let added = (next ^ current).trailing_zeros() as usize;
        let leaf = match leaf_index[added] {
            Some(i) => i,
            None => {
                let (e, _) = score(pats, 1 << added, stats);
                nodes.push(LocalNode {
                    mask: 1 << added,
                    children: None,
                    estimate: e,
                });
                leaf_index[added] = Some(nodes.len() - 1);
                nodes.len() - 1
            }
        };
        nodes.push(LocalNode {
            mask: next,
            children: Some((cur_idx, leaf)),
            estimate: est,
        });
        cur_idx = nodes.len() - 1;
        current = next;
    }
    let root = nodes.len() - 1;
    LocalPlan {
        patterns: pats.clone(),
        nodes,
        root,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_query;
    use crate::store::Dictionary;

    fn pats(text: &str) -> Vec<TriplePattern> {
        let mut d = Dictionary::default();
        parse_query(text, &mut d).unwrap().patterns
    }

    #[test]
    fn chain_of_three() {
        let t = build_and_or_tree(&pats("SELECT * WHERE { ?a P1 ?b . ?b P2 ?c . ?c P3 ?d }"));
        let root = t.or_node(t.root_mask()).unwrap();
        let splits: Vec<(Mask, Mask)> =
            root.derivations.iter().map(|a| (a.left, a.right)).collect();
        assert_eq!(splits, vec![(0b001, 0b110), (0b011, 0b100)]);
        // {P1, P3} is not connected.
        assert!(t.or_node(0b101).is_none());
        assert_eq!(t.or_nodes.len(), 6);
    }

    #[test]
    fn single_pattern() {
        let t = build_and_or_tree(&pats("SELECT * WHERE { ?a p ?b }"));
        assert_eq!(t.or_nodes.len(), 1);
        assert_eq!(t.and_count(), 0);
        let plan = select_best_plan(&t, &StatsCatalog::default());
        assert_eq!(plan.nodes.len(), 1);
        assert!(plan.nodes[plan.root].children.is_none());
    }

    #[test]
    fn star_subsets() {
        let t = build_and_or_tree(&pats(
            "SELECT * WHERE { ?x a ?p . ?x b ?q . ?x c ?r . ?x d ?s }",
        ));
        assert_eq!(t.or_nodes.len(), 15);
    }

    #[test]
    fn equal_estimates_are_deterministic() {
        let p = pats("SELECT * WHERE { ?a p ?b . ?b p ?c . ?c p ?d }");
        let t = build_and_or_tree(&p);
        let a = select_best_plan(&t, &StatsCatalog::default());
        let b = select_best_plan(&t, &StatsCatalog::default());
        let masks = |pl: &LocalPlan| pl.nodes.iter().map(|n| n.mask).collect::<Vec<_>>();
        assert_eq!(masks(&a), masks(&b));
        assert_eq!(a.nodes[a.root].mask, 0b111);
    }
}
