use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::reference::{enumerate_matches, match_binding, monomial_of, reference_answers};
use super::synthetic::{random_graph, random_query, GraphShape, QueryShape};
use crate::maintenance::{CpRef, Dir, Engine, Fault, QueryId, UpdateReport};
use crate::planner::RootLabel;
use crate::provenance::Polynomial;
use crate::query::parse_query;
use crate::store::{EdgeId, NodeId, PredicateId};
use crate::subquery::{Attach, SubqueryType};

#[derive(Debug, Clone, Serialize)]
pub struct VerifyConfig {
    pub trials: usize,
    pub max_edges: usize,
    pub seed: u64,
    pub updates: usize,
    pub max_queries: usize,
    pub min_patterns: usize,
    pub max_patterns: usize,
    /// Run the lemma checks before every n-th insertion; 0 disables them.
    pub lemma_every: usize,
    pub fault: Option<Fault>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            trials: 20,
            max_edges: 300,
            seed: 1,
            updates: 500,
            max_queries: 5,
            min_patterns: 2,
            max_patterns: 5,
            lemma_every: 5,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LemmaStats {
    /// Potential matches the hypothetical edge completes at one position.
    pub one_to_one: usize,
    /// Potential matches it completes at several positions.
    pub one_to_many: usize,
    /// Matches checked again after the edge was inserted.
    pub completed: usize,
}

impl LemmaStats {
    pub fn merge(&mut self, o: &LemmaStats) {
        self.one_to_one += o.one_to_one;
        self.one_to_many += o.one_to_many;
        self.completed += o.completed;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyFailure {
    pub trial: usize,
    /// Rerun with `--seed <trial_seed> --trials 1` to reproduce.
    pub trial_seed: u64,
    /// Update index; `None` for failures at registration or final audit.
    pub step: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub trials: usize,
    pub updates: usize,
    pub queries: usize,
    pub comparisons: usize,
    pub lemmas: LemmaStats,
    pub failure: Option<VerifyFailure>,
    pub elapsed: Duration,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Randomized end-to-end runs: after every update each query's stored answers
/// must equal a from-scratch nested-loop evaluation. Stops at the first failure.
pub fn run_verify(cfg: &VerifyConfig) -> VerifyReport {
    let start = Instant::now();
    let mut report = VerifyReport::default();
    for t in 0..cfg.trials {
        let seed = if cfg.trials == 1 {
            cfg.seed
        } else {
            trial_seed(cfg.seed, t)
        };
        report.trials += 1;
        if let Err((step, detail)) = run_trial(seed, cfg, &mut report) {
            report.failure = Some(VerifyFailure {
                trial: t,
                trial_seed: seed,
                step,
                detail,
            });
            break;
        }
    }
    report.elapsed = start.elapsed();
    report
}

type TrialError = (Option<usize>, String);

fn run_trial(seed: u64, cfg: &VerifyConfig, report: &mut VerifyReport) -> Result<(), TrialError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = GraphShape {
        nodes: rng.gen_range(40..=60),
        predicates: rng.gen_range(4..=5),
        edges: cfg.max_edges * 3 / 5,
        skew: 1.0,
    };
    let g = random_graph(&mut rng, &shape);
    let mut engine = Engine::new(g);
    if let Some(f) = cfg.fault {
        engine.inject_fault(f);
    }
    let qshape = QueryShape {
        min_patterns: cfg.min_patterns,
        max_patterns: cfg.max_patterns,
        constant_prob: 0.2,
        free_prob: 0.3,
    };
    let wanted = rng.gen_range(1..=cfg.max_queries.max(1));
    for _ in 0..wanted * 4 {
        if engine.query_count() == wanted {
            break;
        }
        let Some(text) = random_query(&mut rng, engine.graph(), &qshape) else {
            continue;
        };
        let q = parse_query(&text, engine.dictionary_mut())
            .map_err(|e| (None, format!("{text}: {e}")))?;
        let _ = engine.register_query(q);
    }
    report.queries += engine.query_count();
    let nodes: Vec<NodeId> = engine.graph().vertices().collect();
    let preds: Vec<PredicateId> = engine.graph().predicates().collect();
    let pool: Vec<PredicateId> = engine.query_predicates().into_iter().collect();
    let mut expected: Vec<BTreeMap<Vec<NodeId>, Polynomial>> = (0..engine.query_count())
        .map(|q| reference_answers(engine.query(q), engine.graph()))
        .collect();
    compare(&engine, &expected, None, report)?;
    let mut inserts = 0usize;
    for step in 0..cfg.updates {
        let insert = engine.graph().edge_count() < cfg.max_edges
            && (engine.graph().edge_count() == 0 || rng.gen_bool(0.5));
        let r: UpdateReport = if insert {
            let s = nodes[rng.gen_range(0..nodes.len())];
            let o = if rng.gen_bool(0.05) {
                s
            } else {
                nodes[rng.gen_range(0..nodes.len())]
            };
            let p = if !pool.is_empty() && rng.gen_bool(0.7) {
                pool[rng.gen_range(0..pool.len())]
            } else {
                preds[rng.gen_range(0..preds.len())]
            };
            inserts += 1;
            if cfg.lemma_every > 0 && inserts.is_multiple_of(cfg.lemma_every) {
                check_lemmas_and_insert(&mut engine, s, p, o, &mut report.lemmas)
                    .map_err(|d| (Some(step), d))?
            } else {
                engine.insert_edge(s, p, o)
            }
        } else {
            let live: Vec<EdgeId> = engine.graph().edges().map(|e| e.id).collect();
            engine.delete_edge(live[rng.gen_range(0..live.len())])
        };
        report.updates += 1;
        let e = r.edge.expect("updates name live edges");
        for (q, exp) in expected.iter_mut().enumerate() {
            if engine
                .query(q)
                .patterns
                .iter()
                .any(|t| t.predicate_id() == Some(e.predicate))
            {
                *exp = reference_answers(engine.query(q), engine.graph());
            }
        }
        compare(&engine, &expected, Some(step), report)?;
    }
    let audit = engine.index_audit();
    if !audit.is_clean() {
        return Err((
            None,
            format!(
                "index audit: {:?}",
                &audit.issues[..audit.issues.len().min(3)]
            ),
        ));
    }
    Ok(())
}

fn compare(
    engine: &Engine,
    expected: &[BTreeMap<Vec<NodeId>, Polynomial>],
    step: Option<usize>,
    report: &mut VerifyReport,
) -> Result<(), TrialError> {
    for (q, exp) in expected.iter().enumerate() {
        report.comparisons += 1;
        let got = engine.answers(q);
        if got != exp {
            let d = engine.graph().dictionary();
            let name = |row: &Vec<NodeId>| {
                row.iter()
                    .map(|&n| d.node_name(n))
                    .collect::<Vec<_>>()
                    .join(",")
            };
            let diff = exp
                .iter()
                .find(|(k, v)| got.get(*k) != Some(*v))
                .map(|(k, v)| {
                    format!(
                        "row ({}) expected {v}, stored {:?}",
                        name(k),
                        got.get(k).map(|p| p.to_string())
                    )
                })
                .or_else(|| {
                    got.iter()
                        .find(|(k, _)| !exp.contains_key(*k))
                        .map(|(k, v)| format!("unexpected row ({}) = {v}", name(k)))
                })
                .unwrap_or_default();
            let text = engine.query(q).to_sparql(d);
            return Err((step, format!("query {q} `{text}`: {diff}")));
        }
    }
    Ok(())
}

fn side_refs(
    label: RootLabel,
    attach: Attach,
    sv: Option<u32>,
    ov: Option<u32>,
    b: &std::collections::HashMap<u32, NodeId>,
    result: Vec<NodeId>,
) -> Vec<CpRef> {
    let mk = |node, dir, partner| CpRef {
        node,
        dir,
        label,
        partner,
        result: result.clone(),
    };
    match attach {
        Attach::Subject => vec![mk(b[&sv.unwrap()], Dir::Out, None)],
        Attach::Object => vec![mk(b[&ov.unwrap()], Dir::In, None)],
        Attach::Both => {
            let (u, v) = (b[&sv.unwrap()], b[&ov.unwrap()]);
            if sv == ov {
                vec![mk(u, Dir::Out, Some(v))]
            } else {
                vec![mk(u, Dir::Out, Some(v)), mk(v, Dir::In, Some(u))]
            }
        }
    }
}

/// Checks the potential-match properties for a hypothetical edge, inserts
/// it, and checks that every multi-position match was completed.
///
/// For each match of a query over the graph plus the new edge that uses the
/// edge: at a single position `i`, the rest of the match must already be
/// recorded in the annotations of subquery `i`; at several positions, those
/// positions must form part of one shared group of the query's
/// classification, and after insertion the parent answer and every
/// affected subquery root must carry the match.
pub fn check_lemmas_and_insert(
    engine: &mut Engine,
    s: NodeId,
    p: PredicateId,
    o: NodeId,
    stats: &mut LemmaStats,
) -> Result<UpdateReport, String> {
    let hid = engine.graph().next_edge_id();
    let mut sim = engine.graph().clone();
    sim.insert_edge(s, p, o);
    let mut pending: Vec<(QueryId, Vec<EdgeId>, Vec<usize>)> = Vec::new();
    for q in engine.queries_with_predicate(p) {
        let qg = engine.query(q).clone();
        if qg.len() < 2 {
            continue;
        }
        for m in enumerate_matches(&qg.patterns, &sim) {
            let positions: Vec<usize> = (0..m.len()).filter(|&i| m[i] == hid).collect();
            if positions.is_empty() {
                continue;
            }
            if positions.len() > 1 {
                stats.one_to_many += 1;
                let grouped = engine
                    .classification(q)
                    .groups()
                    .iter()
                    .any(|g| positions.iter().all(|i| g.members.contains(i)));
                if !grouped {
                    return Err(format!("query {q}: positions {positions:?} share the new edge but no group holds them"));
                }
                pending.push((q, m, positions));
                continue;
            }
            stats.one_to_one += 1;
            let i = positions[0];
            let b = match_binding(&qg.patterns, &m, &sim);
            let sub = engine.subqueries(q).nth(i).unwrap().clone();
            let (sv, ov) = (qg.patterns[i].subject.var(), qg.patterns[i].object.var());
            let comps = std::iter::once((sub.sq1.clone(), sub.sq1_attach))
                .chain(sub.sq2.clone().zip(sub.sq2_attach));
            for (k, (comp, attach)) in comps.enumerate() {
                if sub.kind == SubqueryType::II && k == 1 {
                    continue;
                }
                let label = RootLabel {
                    query: q,
                    removed: i,
                    side: k as u8,
                };
                let result: Vec<NodeId> = engine
                    .side_result_vars(label)
                    .iter()
                    .map(|v| b[v])
                    .collect();
                let mono = monomial_of(&comp.iter().map(|&j| m[j]).collect::<Vec<_>>());
                for r in side_refs(label, attach, sv, ov, &b, result) {
                    if engine
                        .annotation(&r)
                        .is_none_or(|a| a.coefficient(&mono) == 0)
                    {
                        return Err(format!(
                            "query {q}: connection point {r:?} lacks {mono} for pattern {i}"
                        ));
                    }
                }
            }
        }
    }
    let report = engine.insert_edge(s, p, o);
    debug_assert_eq!(report.edge.map(|e| e.id), Some(hid));
    for (q, m, positions) in pending {
        stats.completed += 1;
        let qg = engine.query(q).clone();
        let b = match_binding(&qg.patterns, &m, engine.graph());
        let row: Vec<NodeId> = qg.projection.iter().map(|v| b[v]).collect();
        let mono = monomial_of(&m);
        if engine
            .answers(q)
            .get(&row)
            .is_none_or(|a| a.coefficient(&mono) == 0)
        {
            return Err(format!(
                "query {q}: completed match {mono} missing from the answers"
            ));
        }
        for i in positions {
            let sub = engine.subqueries(q).nth(i).unwrap().clone();
            let comps = std::iter::once(sub.sq1.clone()).chain(sub.sq2.clone());
            for (k, comp) in comps.enumerate() {
                let label = RootLabel {
                    query: q,
                    removed: i,
                    side: k as u8,
                };
                let Some((node, cols)) = engine.side_root(label) else {
                    continue;
                };
                let table = &engine.plan().node(node).table;
                let mut binding = vec![NodeId(u32::MAX); table.arity()];
                for (v, &c) in cols {
                    binding[c as usize] = b[v];
                }
                let part = monomial_of(&comp.iter().map(|&j| m[j]).collect::<Vec<_>>());
                if table
                    .get(&binding)
                    .is_none_or(|a| a.coefficient(&part) == 0)
                {
                    return Err(format!(
                        "query {q}: subquery {i} side {k} lacks {part} after insertion"
                    ));
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_run_passes() {
        let cfg = VerifyConfig {
            trials: 3,
            updates: 120,
            max_edges: 150,
            lemma_every: 2,
            ..Default::default()
        };
        let r = run_verify(&cfg);
        assert!(r.passed(), "{:?}", r.failure);
        assert!(r.lemmas.one_to_one > 0);
    }

    #[test]
    fn skip_prune_is_caught() {
        let cfg = VerifyConfig {
            trials: 5,
            updates: 200,
            max_edges: 150,
            lemma_every: 0,
            fault: Some(Fault::SkipPrune),
            ..Default::default()
        };
        let r = run_verify(&cfg);
        let f = r.failure.expect("fault must be detected");
        assert!(f.step.is_some());
    }
}
