use std::collections::{BTreeMap, HashMap, HashSet};
use std::ops::Bound;

use serde::Serialize;

use crate::planner::RootLabel;
use crate::provenance::Polynomial;
use crate::store::{EdgeId, NodeId};

/// Which way the missing edge points, seen from the annotated node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Dir {
    Out,
    In,
}

/// Identifies one connection-point annotation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CpRef {
    pub node: NodeId,
    pub dir: Dir,
    pub label: RootLabel,
    /// Other endpoint when the component reaches both ends of the missing edge.
    pub partner: Option<NodeId>,
    /// Projected values contributed by the component.
    pub result: Vec<NodeId>,
}

type Slot = (NodeId, Dir, RootLabel);
type Entry = (Option<NodeId>, Vec<NodeId>);

/// Annotation side table plus the edge-to-connection-point index.
#[derive(Debug, Clone, Default)]
pub(crate) struct Annotations {
    slots: HashMap<Slot, BTreeMap<Entry, Polynomial>>,
    edge_to_cp: HashMap<EdgeId, HashSet<CpRef>>,
    count: usize,
}

impl Annotations {
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn add(&mut self, r: CpRef, poly: &Polynomial) {
        if poly.is_zero() {
            return;
        }
        for e in poly.edges() {
            self.edge_to_cp.entry(e).or_default().insert(r.clone());
        }
        let slot = self.slots.entry((r.node, r.dir, r.label)).or_default();
        match slot.get_mut(&(r.partner, r.result.clone())) {
            Some(p) => p.add_assign(poly),
            None => {
                slot.insert((r.partner, r.result), poly.clone());
                self.count += 1;
            }
        }
    }

    pub fn get(&self, r: &CpRef) -> Option<&Polynomial> {
        self.slots
            .get(&(r.node, r.dir, r.label))?
            .get(&(r.partner, r.result.clone()))
    }

    /// Entries at one slot whose partner equals `partner`.
    pub fn entries(
        &self,
        node: NodeId,
        dir: Dir,
        label: RootLabel,
        partner: Option<NodeId>,
    ) -> impl Iterator<Item = (&[NodeId], &Polynomial)> + '_ {
        let lo = Bound::Included((partner, Vec::new()));
        let hi = match partner {
            None => Bound::Excluded((Some(NodeId(0)), Vec::new())),
            Some(NodeId(u32::MAX)) => Bound::Unbounded,
            Some(NodeId(v)) => Bound::Excluded((Some(NodeId(v + 1)), Vec::new())),
        };
        self.slots
            .get(&(node, dir, label))
            .into_iter()
            .flat_map(move |m| m.range((lo.clone(), hi.clone())))
            .map(|((_, r), p)| (r.as_slice(), p))
    }

    /// Removes monomials mentioning `e` from every indexed annotation.
    /// Returns how many annotations changed.
    pub fn prune_edge(&mut self, e: EdgeId) -> usize {
        let Some(refs) = self.edge_to_cp.remove(&e) else {
            return 0;
        };
        let mut changed = 0;
        for r in refs {
            let slot_key = (r.node, r.dir, r.label);
            let Some(slot) = self.slots.get_mut(&slot_key) else {
                continue;
            };
            let entry = (r.partner, r.result.clone());
            let Some(poly) = slot.get_mut(&entry) else {
                continue;
            };
            let Some(dropped) = poly.extract(e) else {
                continue;
            };
            changed += 1;
            let orphaned = poly.orphaned_edges(&dropped);
            if poly.is_zero() {
                slot.remove(&entry);
                self.count -= 1;
                if slot.is_empty() {
                    self.slots.remove(&slot_key);
                }
            }
            for f in &orphaned {
                if let Some(set) = self.edge_to_cp.get_mut(f) {
                    set.remove(&r);
                    if set.is_empty() {
                        self.edge_to_cp.remove(f);
                    }
                }
            }
        }
        changed
    }

    pub fn iter(&self) -> impl Iterator<Item = (CpRef, &Polynomial)> + '_ {
        self.slots.iter().flat_map(|(&(node, dir, label), m)| {
            m.iter().map(move |((partner, result), p)| {
                (
                    CpRef {
                        node,
                        dir,
                        label,
                        partner: *partner,
                        result: result.clone(),
                    },
                    p,
                )
            })
        })
    }

    pub fn edge_index(&self) -> &HashMap<EdgeId, HashSet<CpRef>> {
        &self.edge_to_cp
    }

    pub fn edge_index_mut(&mut self) -> &mut HashMap<EdgeId, HashSet<CpRef>> {
        &mut self.edge_to_cp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label() -> RootLabel {
        RootLabel {
            query: 0,
            removed: 1,
            side: 0,
        }
    }

    fn cp(node: u32, partner: Option<u32>, result: &[u32]) -> CpRef {
        CpRef {
            node: NodeId(node),
            dir: Dir::Out,
            label: label(),
            partner: partner.map(NodeId),
            result: result.iter().map(|&x| NodeId(x)).collect(),
        }
    }

    #[test]
    fn partner_ranges_and_pruning() {
        let mut a = Annotations::default();
        let p = |s: &str| s.parse::<Polynomial>().unwrap();
        a.add(cp(1, Some(2), &[5]), &p("e1*e2"));
        a.add(cp(1, Some(3), &[5]), &p("e3"));
        a.add(cp(1, None, &[]), &p("e1 + e4"));
        assert_eq!(a.len(), 3);
        assert_eq!(
            a.entries(NodeId(1), Dir::Out, label(), Some(NodeId(2)))
                .count(),
            1
        );
        assert_eq!(a.entries(NodeId(1), Dir::Out, label(), None).count(), 1);
        assert_eq!(a.prune_edge(EdgeId(1)), 2);
        assert_eq!(a.len(), 2);
        assert_eq!(a.get(&cp(1, None, &[])).unwrap().to_string(), "e4");
        assert!(!a.edge_index().contains_key(&EdgeId(2)));
        assert_eq!(a.prune_edge(EdgeId(1)), 0);
    }
}
