//! Standing-query registration and per-edge update processing.
//!
//! Each registered query keeps its answers with polynomials. For every
//! pattern a subquery is planned into the shared global plan, and the
//! subquery's results are folded into connection-point annotations keyed by
//! the node where the missing edge would attach. An inserted edge is matched
//! against those annotations to produce new answers; a deleted edge is
//! pruned from every polynomial that mentions it, found through two inverted
//! indexes.

mod annotations;

pub use annotations::{CpRef, Dir};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::time::{Duration, Instant};

use serde::Serialize;

use annotations::Annotations;

use crate::eval::{
    delta_delete, delta_insert, evaluate_patterns, materialize_plan, BindingRow, ResultDelta,
};
use crate::planner::{
    build_and_or_tree, compute_statistics, select_best_plan, GlobalPlan, RootLabel, StatsCatalog,
};
use crate::provenance::Polynomial;
use crate::query::{
    canonicalize, classify_query, CanonicalForm, Classification, PredicateMetadata, QueryError,
    QueryGraph, Term, VarId,
};
use crate::store::{Edge, EdgeId, KnowledgeGraph, NodeId, PredicateId};
use crate::subquery::{generate_subqueries, Attach, Subquery};

pub type QueryId = usize;

/// Deliberate defects for checking that verification notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Fault {
    /// Deleted edges are left in answer polynomials.
    SkipPrune,
}

#[derive(Debug, Clone)]
enum Source {
    Plan {
        node: usize,
        cols: HashMap<VarId, u32>,
    },
    /// Type II lone pattern, matched against the store.
    Lookup { pattern: usize },
}

#[derive(Debug, Clone)]
struct Side {
    label: RootLabel,
    attach: Attach,
    source: Source,
    /// Projected variables bound inside this side, in projection order.
    result_vars: Vec<VarId>,
}

#[derive(Debug, Clone, Copy)]
enum Pick {
    Side(usize, usize),
    Subject,
    Object,
}

#[derive(Debug, Clone)]
struct SubqueryState {
    sub: Subquery,
    sides: Vec<Side>,
    /// Where each projected column of a completed answer comes from.
    picks: Vec<Pick>,
}

#[derive(Debug, Clone)]
struct QueryState {
    graph: QueryGraph,
    form: CanonicalForm,
    classification: Classification,
    subqueries: Vec<SubqueryState>,
    /// Picks for single-pattern queries.
    direct: Vec<Pick>,
    answers: BTreeMap<Vec<NodeId>, Polynomial>,
}

/// One connection-point annotation as exposed to callers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Annotation {
    pub node: NodeId,
    pub exp_rel: PredicateId,
    pub dir: Dir,
    pub query: QueryId,
    /// Ordinal of the removed pattern; together with `query` it names the subquery.
    pub removed: usize,
    pub side: u8,
    pub partner: Option<NodeId>,
    pub result: Vec<NodeId>,
    #[serde(serialize_with = "crate::eval::poly_text")]
    pub poly: Polynomial,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubqueryInfo {
    pub removed: usize,
    pub kind: crate::subquery::SubqueryType,
    pub sq1: Vec<usize>,
    pub sq2: Option<Vec<usize>>,
    /// Plan root per planned side.
    pub roots: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegistrationReceipt {
    pub query: QueryId,
    pub answers: Vec<BindingRow>,
    pub classification: Classification,
    pub subqueries: Vec<SubqueryInfo>,
    pub annotations: usize,
    /// Nodes of the local plans before merging, summed over sides.
    pub local_plan_nodes: usize,
    pub created_plan_nodes: usize,
}

/// Change to one answer row. A zero `before` means the row is new; a zero
/// `after` means it disappeared.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnswerChange {
    pub query: QueryId,
    pub bindings: Vec<NodeId>,
    #[serde(serialize_with = "crate::eval::poly_text")]
    pub before: Polynomial,
    #[serde(serialize_with = "crate::eval::poly_text")]
    pub after: Polynomial,
}

impl AnswerChange {
    pub fn is_new(&self) -> bool {
        self.before.is_zero()
    }

    pub fn is_removed(&self) -> bool {
        self.after.is_zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UpdateKind {
    Insert,
    Delete,
}

#[derive(Debug, Clone, Serialize)]
pub struct UpdateReport {
    pub kind: UpdateKind,
    /// `None` when a deletion named no live edge.
    pub edge: Option<Edge>,
    pub changes: Vec<AnswerChange>,
    pub annotations_changed: usize,
    pub plan_nodes_touched: usize,
    /// Time spent updating answers.
    pub response: Duration,
    /// Time spent on plan tables, annotations and indexes.
    pub maintenance: Duration,
    pub total: Duration,
}

impl UpdateReport {
    fn empty(kind: UpdateKind, edge: Option<Edge>, start: Instant) -> Self {
        UpdateReport {
            kind,
            edge,
            changes: Vec::new(),
            annotations_changed: 0,
            plan_nodes_touched: 0,
            response: Duration::ZERO,
            maintenance: Duration::ZERO,
            total: start.elapsed(),
        }
    }

    pub fn added_rows(&self) -> usize {
        self.changes.iter().filter(|c| c.is_new()).count()
    }

    pub fn removed_rows(&self) -> usize {
        self.changes.iter().filter(|c| c.is_removed()).count()
    }
}

/// Disagreement between a live index and one rebuilt from stored state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum AuditIssue {
    MissingResult {
        edge: EdgeId,
        query: QueryId,
        bindings: Vec<NodeId>,
    },
    ExtraResult {
        edge: EdgeId,
        query: QueryId,
        bindings: Vec<NodeId>,
    },
    MissingCp {
        edge: EdgeId,
        cp: CpRef,
    },
    ExtraCp {
        edge: EdgeId,
        cp: CpRef,
    },
    /// Annotation differs from what the plan root tables imply.
    AnnotationDrift {
        cp: CpRef,
    },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AuditReport {
    pub issues: Vec<AuditIssue>,
    pub result_entries: usize,
    pub cp_entries: usize,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

type ResultIndex = HashMap<EdgeId, HashSet<(QueryId, Vec<NodeId>)>>;

/// Owns the graph, the registered queries and all derived state.
#[derive(Debug, Clone, Default)]
pub struct Engine {
    graph: KnowledgeGraph,
    metadata: PredicateMetadata,
    plan: GlobalPlan,
    queries: Vec<QueryState>,
    by_form: HashMap<CanonicalForm, QueryId>,
    by_predicate: HashMap<PredicateId, Vec<(QueryId, usize)>>,
    root_sides: HashMap<usize, Vec<(QueryId, usize, usize)>>,
    annotations: Annotations,
    edge_to_result: ResultIndex,
    stats: Option<StatsCatalog>,
    skip_prune: bool,
}

fn endpoint_vars(q: &QueryGraph, removed: usize) -> (Option<VarId>, Option<VarId>) {
    let t = &q.patterns[removed];
    (t.subject.var(), t.object.var())
}

fn project(picks: &[Pick], sides: &[&[NodeId]], e: &Edge) -> Vec<NodeId> {
    picks
        .iter()
        .map(|p| match *p {
            Pick::Side(k, i) => sides[k][i],
            Pick::Subject => e.subject,
            Pick::Object => e.object,
        })
        .collect()
}

impl Engine {
    pub fn new(graph: KnowledgeGraph) -> Self {
        Engine {
            graph,
            ..Default::default()
        }
    }

    pub fn with_metadata(graph: KnowledgeGraph, metadata: PredicateMetadata) -> Self {
        Engine {
            graph,
            metadata,
            ..Default::default()
        }
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    /// For interning query constants before registration.
    pub fn dictionary_mut(&mut self) -> &mut crate::store::Dictionary {
        self.graph.dictionary_mut()
    }

    pub fn metadata(&self) -> &PredicateMetadata {
        &self.metadata
    }

    pub fn plan(&self) -> &GlobalPlan {
        &self.plan
    }

    pub fn inject_fault(&mut self, fault: Fault) {
        match fault {
            Fault::SkipPrune => self.skip_prune = true,
        }
    }

    pub fn query_count(&self) -> usize {
        self.queries.len()
    }

    pub fn query(&self, q: QueryId) -> &QueryGraph {
        &self.queries[q].graph
    }

    pub fn form(&self, q: QueryId) -> &CanonicalForm {
        &self.queries[q].form
    }

    pub fn classification(&self, q: QueryId) -> &Classification {
        &self.queries[q].classification
    }

    pub fn subqueries(&self, q: QueryId) -> impl Iterator<Item = &Subquery> + '_ {
        self.queries[q].subqueries.iter().map(|s| &s.sub)
    }

    pub fn answers(&self, q: QueryId) -> &BTreeMap<Vec<NodeId>, Polynomial> {
        &self.queries[q].answers
    }

    pub fn answer_rows(&self, q: QueryId) -> Vec<BindingRow> {
        self.queries[q]
            .answers
            .iter()
            .map(|(b, p)| BindingRow {
                bindings: b.clone(),
                provenance: p.clone(),
            })
            .collect()
    }

    /// Queries whose patterns use `p`.
    pub fn queries_with_predicate(&self, p: PredicateId) -> BTreeSet<QueryId> {
        self.by_predicate
            .get(&p)
            .into_iter()
            .flatten()
            .map(|&(q, _)| q)
            .collect()
    }

    pub fn query_predicates(&self) -> BTreeSet<PredicateId> {
        self.by_predicate.keys().copied().collect()
    }

    pub fn annotation_count(&self) -> usize {
        self.annotations.len()
    }

    /// All annotations, sorted.
    pub fn annotations(&self) -> Vec<Annotation> {
        let mut out: Vec<Annotation> = self
            .annotations
            .iter()
            .map(|(r, p)| Annotation {
                node: r.node,
                exp_rel: self.queries[r.label.query].graph.patterns[r.label.removed]
                    .predicate_id()
                    .expect("registered patterns have constant predicates"),
                dir: r.dir,
                query: r.label.query,
                removed: r.label.removed,
                side: r.label.side,
                partner: r.partner,
                result: r.result,
                poly: p.clone(),
            })
            .collect();
        out.sort_by(|a, b| {
            (
                a.query, a.removed, a.side, a.node, a.dir, a.partner, &a.result,
            )
                .cmp(&(
                    b.query, b.removed, b.side, b.node, b.dir, b.partner, &b.result,
                ))
        });
        out
    }

    /// Projected variables of side `label`, in the order used by annotation results.
    pub fn side_result_vars(&self, label: RootLabel) -> &[VarId] {
        &self.queries[label.query].subqueries[label.removed].sides[label.side as usize].result_vars
    }

    /// Plan root of a planned side.
    pub fn side_root(&self, label: RootLabel) -> Option<(usize, &HashMap<VarId, u32>)> {
        match &self.queries[label.query].subqueries[label.removed].sides[label.side as usize].source
        {
            Source::Plan { node, cols } => Some((*node, cols)),
            Source::Lookup { .. } => None,
        }
    }

    pub fn annotation(&self, r: &CpRef) -> Option<&Polynomial> {
        self.annotations.get(r)
    }

    pub fn statistics(&mut self) -> &StatsCatalog {
        if self.stats.is_none() {
            self.stats = Some(compute_statistics(&self.graph));
        }
        self.stats.as_ref().unwrap()
    }

    pub fn register_query(&mut self, q: QueryGraph) -> Result<RegistrationReceipt, QueryError> {
        if let Some(i) = q.patterns.iter().position(|t| t.predicate.var().is_some()) {
            return Err(QueryError::VariablePredicate(i));
        }
        if q.is_empty() || !q.is_connected() {
            return Err(QueryError::Disconnected);
        }
        let form = canonicalize(&q).form;
        if let Some(&id) = self.by_form.get(&form) {
            return Err(QueryError::Duplicate(id));
        }
        let id = self.queries.len();
        let classification = classify_query(&q, &self.metadata);
        let answers = evaluate_patterns(&q.patterns, q.var_count(), &q.projection, &self.graph);
        for (row, poly) in &answers {
            for e in poly.edges() {
                self.edge_to_result
                    .entry(e)
                    .or_default()
                    .insert((id, row.clone()));
            }
        }
        let subs = if q.len() >= 2 {
            generate_subqueries(&q).map_err(|_| QueryError::Disconnected)?
        } else {
            Vec::new()
        };
        let stats = self
            .stats
            .take()
            .unwrap_or_else(|| compute_statistics(&self.graph));
        let mut local_plan_nodes = 0;
        let mut created_plan_nodes = 0;
        let mut states = Vec::with_capacity(subs.len());
        for sub in subs {
            let mut sides = Vec::new();
            let comps: Vec<(Vec<usize>, Attach)> =
                std::iter::once((sub.sq1.clone(), sub.sq1_attach))
                    .chain(sub.sq2.clone().zip(sub.sq2_attach))
                    .collect();
            let lone = matches!(sub.kind, crate::subquery::SubqueryType::II);
            for (k, (comp, attach)) in comps.into_iter().enumerate() {
                let label = RootLabel {
                    query: id,
                    removed: sub.removed,
                    side: k as u8,
                };
                let vars: BTreeSet<VarId> =
                    comp.iter().flat_map(|&i| q.patterns[i].vars()).collect();
                let result_vars: Vec<VarId> = q
                    .projection
                    .iter()
                    .copied()
                    .filter(|v| vars.contains(v))
                    .collect();
                let source = if lone && k == 1 {
                    Source::Lookup { pattern: comp[0] }
                } else {
                    let patterns: Vec<_> = comp.iter().map(|&i| q.patterns[i]).collect();
                    let local = select_best_plan(&build_and_or_tree(&patterns), &stats);
                    let outcome = self.plan.merge(&local, label);
                    local_plan_nodes += outcome.local_nodes;
                    created_plan_nodes += outcome.created.len();
                    Source::Plan {
                        node: outcome.node,
                        cols: outcome.renaming,
                    }
                };
                sides.push(Side {
                    label,
                    attach,
                    source,
                    result_vars,
                });
            }
            let (sv, ov) = endpoint_vars(&q, sub.removed);
            let picks = q
                .projection
                .iter()
                .map(|v| {
                    for (k, s) in sides.iter().enumerate() {
                        if let Some(i) = s.result_vars.iter().position(|x| x == v) {
                            return Pick::Side(k, i);
                        }
                    }
                    if sv == Some(*v) {
                        Pick::Subject
                    } else {
                        debug_assert_eq!(ov, Some(*v));
                        Pick::Object
                    }
                })
                .collect();
            states.push(SubqueryState { sub, sides, picks });
        }
        self.stats = Some(stats);
        materialize_plan(&mut self.plan, &self.graph);

        let direct = if q.len() == 1 {
            let (sv, _) = endpoint_vars(&q, 0);
            q.projection
                .iter()
                .map(|v| {
                    if sv == Some(*v) {
                        Pick::Subject
                    } else {
                        Pick::Object
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        let before = self.annotations.len();
        for (si, st) in states.iter().enumerate() {
            for (k, side) in st.sides.iter().enumerate() {
                if let Source::Plan { node, .. } = side.source {
                    self.root_sides.entry(node).or_default().push((id, si, k));
                }
            }
        }
        for t in &q.patterns {
            let p = t.predicate_id().unwrap();
            self.by_predicate
                .entry(p)
                .or_default()
                .push((id, t.ordinal));
        }
        self.by_form.insert(form.clone(), id);
        self.queries.push(QueryState {
            graph: q,
            form,
            classification: classification.clone(),
            subqueries: states,
            direct,
            answers,
        });
        let mut infos = Vec::new();
        for si in 0..self.queries[id].subqueries.len() {
            let mut roots = Vec::new();
            for k in 0..self.queries[id].subqueries[si].sides.len() {
                let Source::Plan { node, .. } = self.queries[id].subqueries[si].sides[k].source
                else {
                    continue;
                };
                roots.push(node);
                let rows: Vec<(Box<[NodeId]>, Polynomial)> = self
                    .plan
                    .node(node)
                    .table
                    .rows()
                    .map(|r| (r.binding.clone(), r.poly.clone()))
                    .collect();
                for (b, p) in rows {
                    self.annotate(id, si, k, &b, &p);
                }
            }
            let s = &self.queries[id].subqueries[si].sub;
            infos.push(SubqueryInfo {
                removed: s.removed,
                kind: s.kind,
                sq1: s.sq1.clone(),
                sq2: s.sq2.clone(),
                roots,
            });
        }
        Ok(RegistrationReceipt {
            query: id,
            answers: self.answer_rows(id),
            classification,
            subqueries: infos,
            annotations: self.annotations.len() - before,
            local_plan_nodes,
            created_plan_nodes,
        })
    }

    /// Connection points a side row of a plan root creates.
    fn cp_refs(&self, q: QueryId, si: usize, k: usize, binding: &[NodeId]) -> Vec<CpRef> {
        let qs = &self.queries[q];
        let st = &qs.subqueries[si];
        let side = &st.sides[k];
        let Source::Plan { cols, .. } = &side.source else {
            return Vec::new();
        };
        let (sv, ov) = endpoint_vars(&qs.graph, st.sub.removed);
        let col =
            |v: Option<VarId>| binding[cols[&v.expect("attached endpoint is a variable")] as usize];
        let result: Vec<NodeId> = side
            .result_vars
            .iter()
            .map(|v| binding[cols[v] as usize])
            .collect();
        let mk = |node, dir, partner| CpRef {
            node,
            dir,
            label: side.label,
            partner,
            result: result.clone(),
        };
        match side.attach {
            Attach::Subject => vec![mk(col(sv), Dir::Out, None)],
            Attach::Object => vec![mk(col(ov), Dir::In, None)],
            Attach::Both => {
                let (u, v) = (col(sv), col(ov));
                if sv == ov {
                    vec![mk(u, Dir::Out, Some(v))]
                } else {
                    vec![mk(u, Dir::Out, Some(v)), mk(v, Dir::In, Some(u))]
                }
            }
        }
    }

    fn annotate(&mut self, q: QueryId, si: usize, k: usize, binding: &[NodeId], poly: &Polynomial) {
        for r in self.cp_refs(q, si, k, binding) {
            self.annotations.add(r, poly);
        }
    }

    /// Values one side offers for completing pattern `removed` with `e`:
    /// projected results with their polynomials. With `with_new`, matches
    /// that themselves use `e` are included.
    fn side_values(
        &self,
        q: QueryId,
        si: usize,
        k: usize,
        e: &Edge,
        deltas: &HashMap<usize, ResultDelta>,
        with_new: bool,
    ) -> Vec<(Vec<NodeId>, Polynomial)> {
        let qs = &self.queries[q];
        let st = &qs.subqueries[si];
        let side = &st.sides[k];
        let (sv, ov) = endpoint_vars(&qs.graph, st.sub.removed);
        match &side.source {
            Source::Plan { node, cols } => {
                let (slot_node, dir, partner) = match side.attach {
                    Attach::Subject => (e.subject, Dir::Out, None),
                    Attach::Object => (e.object, Dir::In, None),
                    Attach::Both => (e.subject, Dir::Out, Some(e.object)),
                };
                let mut out: BTreeMap<Vec<NodeId>, Polynomial> = BTreeMap::new();
                for (r, p) in self
                    .annotations
                    .entries(slot_node, dir, side.label, partner)
                {
                    out.entry(r.to_vec()).or_default().add_assign(p);
                }
                if with_new {
                    if let Some(d) = deltas.get(node) {
                        let at = |v: Option<VarId>, b: &[NodeId]| b[cols[&v.unwrap()] as usize];
                        for row in &d.added {
                            let b = &row.bindings;
                            let ok = match side.attach {
                                Attach::Subject => at(sv, b) == e.subject,
                                Attach::Object => at(ov, b) == e.object,
                                Attach::Both => at(sv, b) == e.subject && at(ov, b) == e.object,
                            };
                            if ok {
                                let r: Vec<NodeId> = side
                                    .result_vars
                                    .iter()
                                    .map(|v| b[cols[v] as usize])
                                    .collect();
                                out.entry(r).or_default().add_assign(&row.provenance);
                            }
                        }
                    }
                }
                out.into_iter().collect()
            }
            Source::Lookup { pattern } => {
                let t = qs.graph.patterns[*pattern];
                let (var, val) = match side.attach {
                    Attach::Subject => (sv.unwrap(), e.subject),
                    _ => (ov.unwrap(), e.object),
                };
                let bind = |term: Term<NodeId>| match term {
                    Term::Var(v) if v == var => Some(val),
                    Term::Var(_) => None,
                    Term::Const(c) => Some(c),
                };
                let mut out: BTreeMap<Vec<NodeId>, Polynomial> = BTreeMap::new();
                for f in self
                    .graph
                    .lookup(bind(t.subject), t.predicate.constant(), bind(t.object))
                {
                    if (!with_new && f.id == e.id) || !t.admits(f) {
                        continue;
                    }
                    let r: Vec<NodeId> = side
                        .result_vars
                        .iter()
                        .map(|&v| {
                            if t.subject.var() == Some(v) {
                                f.subject
                            } else {
                                f.object
                            }
                        })
                        .collect();
                    out.entry(r)
                        .or_default()
                        .add_assign(&Polynomial::symbol(f.id));
                }
                out.into_iter().collect()
            }
        }
    }

    pub fn insert_triple(&mut self, subject: &str, predicate: &str, object: &str) -> UpdateReport {
        let start = Instant::now();
        let id = self.graph.insert_triple(subject, predicate, object);
        let e = *self.graph.edge(id).unwrap();
        self.handle_insertion(e, start)
    }

    pub fn insert_edge(
        &mut self,
        subject: NodeId,
        predicate: PredicateId,
        object: NodeId,
    ) -> UpdateReport {
        let start = Instant::now();
        let id = self.graph.insert_edge(subject, predicate, object);
        let e = *self.graph.edge(id).unwrap();
        self.handle_insertion(e, start)
    }

    /// `start` is taken before the store write so totals match deletions.
    fn handle_insertion(&mut self, e: Edge, start: Instant) -> UpdateReport {
        self.stats = None;
        let Some(targets) = self.by_predicate.get(&e.predicate).cloned() else {
            return UpdateReport::empty(UpdateKind::Insert, Some(e), start);
        };
        let t_plan = Instant::now();
        let deltas = delta_insert(&mut self.plan, &e);
        let plan_time = t_plan.elapsed();

        let t_resp = Instant::now();
        let mut found: BTreeMap<QueryId, BTreeMap<Vec<NodeId>, Polynomial>> = BTreeMap::new();
        for (q, i) in targets {
            let qs = &self.queries[q];
            if !qs.graph.patterns[i].admits(&e) {
                continue;
            }
            let acc = found.entry(q).or_default();
            if qs.subqueries.is_empty() {
                acc.entry(project(&qs.direct, &[], &e))
                    .or_default()
                    .add_assign(&Polynomial::symbol(e.id));
                continue;
            }
            let st = &qs.subqueries[i];
            let with_new = qs.classification.in_group(i);
            let lists: Vec<Vec<(Vec<NodeId>, Polynomial)>> = (0..st.sides.len())
                .map(|k| self.side_values(q, i, k, &e, &deltas, with_new))
                .collect();
            let mut combos: Vec<(Vec<&[NodeId]>, Polynomial)> =
                vec![(Vec::new(), Polynomial::symbol(e.id))];
            for list in &lists {
                combos = combos
                    .iter()
                    .flat_map(|(rs, p)| {
                        list.iter().map(move |(r, lp)| {
                            let mut rs = rs.clone();
                            rs.push(r.as_slice());
                            (rs, p.mul(lp))
                        })
                    })
                    .collect();
            }
            for (rs, p) in combos {
                acc.entry(project(&st.picks, &rs, &e))
                    .or_default()
                    .add_assign(&p);
            }
        }
        let mut changes = Vec::new();
        for (q, rows) in found {
            for (row, mut poly) in rows {
                // A match using `e` at m positions was produced once per position.
                poly.divide_by_exponent_of(e.id);
                for f in poly.edges() {
                    self.edge_to_result
                        .entry(f)
                        .or_default()
                        .insert((q, row.clone()));
                }
                let slot = self.queries[q].answers.entry(row.clone()).or_default();
                let before = slot.clone();
                slot.add_assign(&poly);
                changes.push(AnswerChange {
                    query: q,
                    bindings: row,
                    before,
                    after: slot.clone(),
                });
            }
        }
        let response = t_resp.elapsed();

        let t_maint = Instant::now();
        let before = self.annotations.len();
        let mut touched = 0;
        for (node, d) in &deltas {
            touched += 1;
            let Some(sides) = self.root_sides.get(node).cloned() else {
                continue;
            };
            for (q, si, k) in sides {
                for row in &d.added {
                    self.annotate(q, si, k, &row.bindings, &row.provenance);
                }
            }
        }
        let annotations_changed = self.annotations.len() - before;
        let maintenance = plan_time + t_maint.elapsed();
        UpdateReport {
            kind: UpdateKind::Insert,
            edge: Some(e),
            changes,
            annotations_changed,
            plan_nodes_touched: touched,
            response,
            maintenance,
            total: start.elapsed(),
        }
    }

    /// Deletes the first edge matching the triple, in id order.
    pub fn delete_triple(&mut self, subject: &str, predicate: &str, object: &str) -> UpdateReport {
        let d = self.graph.dictionary();
        let id = match (d.node(subject), d.predicate(predicate), d.node(object)) {
            (Some(s), Some(p), Some(o)) => self
                .graph
                .lookup(Some(s), Some(p), Some(o))
                .map(|e| e.id)
                .min(),
            _ => None,
        };
        match id {
            Some(id) => self.delete_edge(id),
            None => UpdateReport::empty(UpdateKind::Delete, None, Instant::now()),
        }
    }

    pub fn delete_edge(&mut self, id: EdgeId) -> UpdateReport {
        let start = Instant::now();
        let Some(e) = self.graph.delete_edge(id) else {
            return UpdateReport::empty(UpdateKind::Delete, None, start);
        };
        self.stats = None;

        let t_resp = Instant::now();
        let mut changes = Vec::new();
        if let Some(rows) = self.edge_to_result.remove(&id) {
            let mut rows: Vec<_> = rows.into_iter().collect();
            rows.sort();
            for (q, row) in rows {
                if self.skip_prune {
                    continue;
                }
                let answers = &mut self.queries[q].answers;
                let Some(poly) = answers.get_mut(&row) else {
                    continue;
                };
                let Some(dropped) = poly.extract(id) else {
                    continue;
                };
                let orphaned = poly.orphaned_edges(&dropped);
                let after = poly.clone();
                let before = after.add(&dropped);
                if after.is_zero() {
                    answers.remove(&row);
                }
                for f in &orphaned {
                    if let Some(set) = self.edge_to_result.get_mut(f) {
                        set.remove(&(q, row.clone()));
                        if set.is_empty() {
                            self.edge_to_result.remove(f);
                        }
                    }
                }
                changes.push(AnswerChange {
                    query: q,
                    bindings: row,
                    before,
                    after,
                });
            }
        }
        let response = t_resp.elapsed();

        let t_maint = Instant::now();
        let annotations_changed = self.annotations.prune_edge(id);
        let deltas = delta_delete(&mut self.plan, &e);
        let maintenance = t_maint.elapsed();
        UpdateReport {
            kind: UpdateKind::Delete,
            edge: Some(e),
            changes,
            annotations_changed,
            plan_nodes_touched: deltas.len(),
            response,
            maintenance,
            total: start.elapsed(),
        }
    }

    /// Rebuilds both inverted indexes from stored answers and annotations and
    /// compares them with the live ones. Annotations are also recomputed from
    /// the plan root tables.
    pub fn index_audit(&self) -> AuditReport {
        let mut issues = Vec::new();
        let mut expected: ResultIndex = HashMap::new();
        for (q, qs) in self.queries.iter().enumerate() {
            for (row, poly) in &qs.answers {
                for e in poly.edges() {
                    expected.entry(e).or_default().insert((q, row.clone()));
                }
            }
        }
        diff_index(
            &expected,
            &self.edge_to_result,
            &mut issues,
            |edge, (query, bindings), missing| {
                if missing {
                    AuditIssue::MissingResult {
                        edge,
                        query,
                        bindings,
                    }
                } else {
                    AuditIssue::ExtraResult {
                        edge,
                        query,
                        bindings,
                    }
                }
            },
        );

        let mut expected_cp: HashMap<EdgeId, HashSet<CpRef>> = HashMap::new();
        for (r, poly) in self.annotations.iter() {
            for e in poly.edges() {
                expected_cp.entry(e).or_default().insert(r.clone());
            }
        }
        diff_index(
            &expected_cp,
            self.annotations.edge_index(),
            &mut issues,
            |edge, cp, missing| {
                if missing {
                    AuditIssue::MissingCp { edge, cp }
                } else {
                    AuditIssue::ExtraCp { edge, cp }
                }
            },
        );

        let mut rebuilt: BTreeMap<CpRef, Polynomial> = BTreeMap::new();
        for (q, qs) in self.queries.iter().enumerate() {
            for (si, st) in qs.subqueries.iter().enumerate() {
                for (k, side) in st.sides.iter().enumerate() {
                    let Source::Plan { node, .. } = side.source else {
                        continue;
                    };
                    for row in self.plan.node(node).table.rows() {
                        for r in self.cp_refs(q, si, k, &row.binding) {
                            rebuilt.entry(r).or_default().add_assign(&row.poly);
                        }
                    }
                }
            }
        }
        let live: BTreeMap<CpRef, &Polynomial> = self.annotations.iter().collect();
        for (r, p) in &rebuilt {
            if live.get(r).is_none_or(|l| *l != p) {
                issues.push(AuditIssue::AnnotationDrift { cp: r.clone() });
            }
        }
        for r in live.keys() {
            if !rebuilt.contains_key(r) {
                issues.push(AuditIssue::AnnotationDrift { cp: r.clone() });
            }
        }
        AuditReport {
            issues,
            result_entries: self.edge_to_result.values().map(HashSet::len).sum(),
            cp_entries: self
                .annotations
                .edge_index()
                .values()
                .map(HashSet::len)
                .sum(),
        }
    }

    /// Drops one edge's answer-index entry; for exercising the audit.
    #[doc(hidden)]
    pub fn corrupt_result_index(&mut self, e: EdgeId) -> bool {
        self.edge_to_result.remove(&e).is_some()
    }

    #[doc(hidden)]
    pub fn corrupt_cp_index(&mut self, e: EdgeId) -> bool {
        self.annotations.edge_index_mut().remove(&e).is_some()
    }
}

fn diff_index<T: Clone + Eq + std::hash::Hash + Ord>(
    expected: &HashMap<EdgeId, HashSet<T>>,
    live: &HashMap<EdgeId, HashSet<T>>,
    issues: &mut Vec<AuditIssue>,
    mk: impl Fn(EdgeId, T, bool) -> AuditIssue,
) {
    let empty = HashSet::new();
    let edges: BTreeSet<EdgeId> = expected.keys().chain(live.keys()).copied().collect();
    for e in edges {
        let (want, have) = (
            expected.get(&e).unwrap_or(&empty),
            live.get(&e).unwrap_or(&empty),
        );
        let mut missing: Vec<&T> = want.difference(have).collect();
        missing.sort();
        issues.extend(missing.into_iter().map(|t| mk(e, t.clone(), true)));
        let mut extra: Vec<&T> = have.difference(want).collect();
        extra.sort();
        issues.extend(extra.into_iter().map(|t| mk(e, t.clone(), false)));
    }
}
