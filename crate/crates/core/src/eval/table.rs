use std::collections::{HashMap, HashSet};

use crate::provenance::Polynomial;
use crate::store::{EdgeId, NodeId};

pub type RowId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub binding: Box<[NodeId]>,
    pub poly: Polynomial,
}

#[derive(Debug, Clone)]
struct ColumnIndex {
    cols: Vec<usize>,
    buckets: HashMap<Box<[NodeId]>, Vec<RowId>>,
}

impl ColumnIndex {
    fn key(&self, binding: &[NodeId]) -> Box<[NodeId]> {
        self.cols.iter().map(|&c| binding[c]).collect()
    }
}

/// Materialized result of one plan expression: one row per distinct full
/// binding, each with its polynomial, plus hash indexes on column subsets.
#[derive(Debug, Clone, Default)]
pub struct Table {
    arity: usize,
    slots: Vec<Option<Row>>,
    free: Vec<RowId>,
    by_binding: HashMap<Box<[NodeId]>, RowId>,
    indexes: Vec<ColumnIndex>,
    by_edge: HashMap<EdgeId, HashSet<RowId>>,
}

impl Table {
    pub fn new(arity: usize) -> Self {
        Self {
            arity,
            ..Default::default()
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.by_binding.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_binding.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &Row> + '_ {
        self.slots.iter().filter_map(Option::as_ref)
    }

    pub fn get(&self, binding: &[NodeId]) -> Option<&Polynomial> {
        self.by_binding
            .get(binding)
            .map(|&id| &self.slots[id].as_ref().unwrap().poly)
    }

    /// Returns the index over `cols`, creating and filling it on first use.
    pub fn ensure_index(&mut self, cols: &[usize]) -> usize {
        if let Some(i) = self.indexes.iter().position(|ix| ix.cols == cols) {
            return i;
        }
        let mut ix = ColumnIndex {
            cols: cols.to_vec(),
            buckets: HashMap::new(),
        };
        for (id, row) in self.slots.iter().enumerate() {
            if let Some(row) = row {
                ix.buckets.entry(ix.key(&row.binding)).or_default().push(id);
            }
        }
        self.indexes.push(ix);
        self.indexes.len() - 1
    }

    /// Rows whose indexed columns equal `key`.
    pub fn probe<'a>(&'a self, index: usize, key: &[NodeId]) -> impl Iterator<Item = &'a Row> + 'a {
        self.indexes[index]
            .buckets
            .get(key)
            .into_iter()
            .flatten()
            .map(move |&id| self.slots[id].as_ref().unwrap())
    }

    pub fn index_columns(&self, index: usize) -> &[usize] {
        &self.indexes[index].cols
    }

    /// Adds `poly` to the row for `binding`, creating the row if needed.
    pub fn add(&mut self, binding: &[NodeId], poly: &Polynomial) {
        debug_assert_eq!(binding.len(), self.arity);
        if poly.is_zero() {
            return;
        }
        let next = self.next_id(binding);
        for e in poly.edges() {
            self.by_edge.entry(e).or_default().insert(next);
        }
        if let Some(&id) = self.by_binding.get(binding) {
            self.slots[id].as_mut().unwrap().poly.add_assign(poly);
            return;
        }
        let row = Row {
            binding: binding.into(),
            poly: poly.clone(),
        };
        let id = match self.free.pop() {
            Some(id) => {
                self.slots[id] = Some(row);
                id
            }
            None => {
                self.slots.push(Some(row));
                self.slots.len() - 1
            }
        };
        for ix in &mut self.indexes {
            ix.buckets.entry(ix.key(binding)).or_default().push(id);
        }
        self.by_binding.insert(binding.into(), id);
    }

    fn next_id(&self, binding: &[NodeId]) -> RowId {
        match self.by_binding.get(binding) {
            Some(&id) => id,
            None => self.free.last().copied().unwrap_or(self.slots.len()),
        }
    }

    /// Removes the row for `binding`, returning its polynomial.
    pub fn remove(&mut self, binding: &[NodeId]) -> Option<Polynomial> {
        let id = self.by_binding.remove(binding)?;
        let row = self.slots[id].take().unwrap();
        for e in row.poly.edges() {
            self.unlink(e, id);
        }
        for ix in &mut self.indexes {
            let key = ix.key(&row.binding);
            if let Some(bucket) = ix.buckets.get_mut(&key) {
                if let Some(pos) = bucket.iter().position(|&r| r == id) {
                    bucket.swap_remove(pos);
                }
                if bucket.is_empty() {
                    ix.buckets.remove(&key);
                }
            }
        }
        self.free.push(id);
        Some(row.poly)
    }

    fn unlink(&mut self, e: EdgeId, id: RowId) {
        if let Some(set) = self.by_edge.get_mut(&e) {
            set.remove(&id);
            if set.is_empty() {
                self.by_edge.remove(&e);
            }
        }
    }

    /// Drops monomials mentioning `e` from every row; rows left with nothing
    /// go away. Returns each touched binding with the dropped part and
    /// whether the row is gone.
    pub fn prune_edge(&mut self, e: EdgeId) -> Vec<(Box<[NodeId]>, Polynomial, bool)> {
        let Some(ids) = self.by_edge.remove(&e) else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            let Some(row) = self.slots[id].as_mut() else {
                continue;
            };
            let Some(dropped) = row.poly.extract(e) else {
                continue;
            };
            let gone = row.poly.is_zero();
            let binding = row.binding.clone();
            for f in row.poly.orphaned_edges(&dropped) {
                if f != e {
                    self.unlink(f, id);
                }
            }
            if gone {
                self.remove(&binding);
            }
            out.push((binding, dropped, gone));
        }
        out
    }

    /// Rows whose polynomial mentions `e`.
    pub fn rows_with_edge(&self, e: EdgeId) -> impl Iterator<Item = &Row> + '_ {
        self.by_edge
            .get(&e)
            .into_iter()
            .flatten()
            .map(move |&id| self.slots[id].as_ref().unwrap())
    }

    pub fn clear(&mut self) {
        let cols: Vec<Vec<usize>> = self.indexes.iter().map(|ix| ix.cols.clone()).collect();
        *self = Table::new(self.arity);
        for c in cols {
            self.ensure_index(&c);
        }
    }

    /// Rows as a sorted list, for comparisons in tests and dumps.
    pub fn snapshot(&self) -> Vec<(Vec<NodeId>, Polynomial)> {
        let mut v: Vec<(Vec<NodeId>, Polynomial)> = self
            .rows()
            .map(|r| (r.binding.to_vec(), r.poly.clone()))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }
}
