use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::naive::NaiveBaseline;
use super::synthetic::{random_graph, random_query, GraphShape, QueryShape};
use super::workload::{generate_workload, Preset, Update, WorkloadConfig};
use crate::maintenance::{Engine, UpdateKind};
use crate::query::parse_query;
use crate::store::PredicateId;

/// Default synthetic dataset: 100K edges over 20K nodes and 30 predicates.
pub const SYNTHETIC_GRAPH: GraphShape = GraphShape {
    nodes: 20_000,
    predicates: 30,
    edges: 100_000,
    skew: 1.5,
};

pub const SYNTHETIC_QUERIES: QueryShape = QueryShape {
    min_patterns: 2,
    max_patterns: 4,
    constant_prob: 0.3,
    free_prob: 0.0,
};

/// Engine and baseline loaded with the same graph and queries.
#[derive(Debug, Clone)]
pub struct BenchSetup {
    pub engine: Engine,
    pub naive: NaiveBaseline,
    pub queries: Vec<String>,
    pub registration: Duration,
}

impl BenchSetup {
    /// Predicates of the registered queries; updates are drawn from these.
    pub fn predicate_pool(&self) -> Vec<PredicateId> {
        self.engine.query_predicates().into_iter().collect()
    }

    pub fn workload(&self, size: usize, delete_ratio: f64, seed: u64) -> Vec<Update> {
        generate_workload(
            self.engine.graph(),
            &WorkloadConfig {
                size,
                delete_ratio,
                seed,
                predicate_pool: self.predicate_pool(),
            },
        )
        .expect("registered queries give a non-empty pool")
    }
}

/// Random graph plus `queries` distinct random queries registered in both
/// the engine and the baseline.
pub fn synthetic_setup(
    graph: &GraphShape,
    shape: &QueryShape,
    queries: usize,
    seed: u64,
) -> BenchSetup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_graph(&mut rng, graph);
    let mut engine = Engine::new(g.clone());
    let mut naive = NaiveBaseline::new(g);
    let mut texts = Vec::new();
    let mut registration = Duration::ZERO;
    let mut attempts = 0;
    while texts.len() < queries && attempts < queries * 100 {
        attempts += 1;
        let Some(text) = random_query(&mut rng, engine.graph(), shape) else {
            continue;
        };
        let Ok(q) = parse_query(&text, engine.dictionary_mut()) else {
            continue;
        };
        let start = Instant::now();
        if engine.register_query(q).is_err() {
            continue;
        }
        registration += start.elapsed();
        let q = parse_query(&text, naive.dictionary_mut()).expect("parsed once already");
        naive.register(q);
        texts.push(text);
    }
    BenchSetup {
        engine,
        naive,
        queries: texts,
        registration,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Incremental,
    Naive,
}

#[derive(Debug, Clone, Serialize)]
pub struct UpdateTiming {
    pub kind: UpdateKind,
    pub response_us: f64,
    pub maintenance_us: f64,
    pub total_us: f64,
}

/// Timings and answer churn for one pass over a workload.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub mode: Mode,
    pub updates: usize,
    pub inserts: usize,
    pub deletes: usize,
    /// Deletions that named no live edge.
    pub skipped: usize,
    pub answers_added: usize,
    pub answers_removed: usize,
    pub answers_changed: usize,
    /// Query re-executions, naive mode only.
    pub reevaluated: usize,
    pub total_s: f64,
    pub response_s: f64,
    pub maintenance_s: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_update: Vec<UpdateTiming>,
}

impl BenchReport {
    fn new(mode: Mode) -> Self {
        BenchReport {
            mode,
            updates: 0,
            inserts: 0,
            deletes: 0,
            skipped: 0,
            answers_added: 0,
            answers_removed: 0,
            answers_changed: 0,
            reevaluated: 0,
            total_s: 0.0,
            response_s: 0.0,
            maintenance_s: 0.0,
            per_update: Vec::new(),
        }
    }

    pub fn mean_update_us(&self) -> f64 {
        if self.updates == 0 {
            0.0
        } else {
            self.total_s * 1e6 / self.updates as f64
        }
    }
}

fn us(d: Duration) -> f64 {
    d.as_secs_f64() * 1e6
}

pub fn run_incremental(
    engine: &mut Engine,
    workload: &[Update],
    keep_per_update: bool,
) -> BenchReport {
    let mut r = BenchReport::new(Mode::Incremental);
    for u in workload {
        let rep = u.apply(engine);
        r.updates += 1;
        match rep.kind {
            UpdateKind::Insert => r.inserts += 1,
            UpdateKind::Delete => r.deletes += 1,
        }
        if rep.edge.is_none() {
            r.skipped += 1;
        }
        for c in &rep.changes {
            if c.is_new() {
                r.answers_added += 1;
            } else if c.is_removed() {
                r.answers_removed += 1;
            } else {
                r.answers_changed += 1;
            }
        }
        r.total_s += rep.total.as_secs_f64();
        r.response_s += rep.response.as_secs_f64();
        r.maintenance_s += rep.maintenance.as_secs_f64();
        if keep_per_update {
            r.per_update.push(UpdateTiming {
                kind: rep.kind,
                response_us: us(rep.response),
                maintenance_us: us(rep.maintenance),
                total_us: us(rep.total),
            });
        }
    }
    r
}

pub fn run_naive(
    naive: &mut NaiveBaseline,
    workload: &[Update],
    keep_per_update: bool,
) -> BenchReport {
    let mut r = BenchReport::new(Mode::Naive);
    for u in workload {
        let before: Vec<usize> = (0..naive.query_count())
            .map(|q| naive.answers(q).len())
            .collect();
        let rep = naive.apply(u);
        r.updates += 1;
        let kind = if u.is_insert() {
            UpdateKind::Insert
        } else {
            UpdateKind::Delete
        };
        match kind {
            UpdateKind::Insert => r.inserts += 1,
            UpdateKind::Delete => r.deletes += 1,
        }
        if rep.edge.is_none() {
            r.skipped += 1;
        }
        for (q, n) in before.into_iter().enumerate() {
            let m = naive.answers(q).len();
            r.answers_added += m.saturating_sub(n);
            r.answers_removed += n.saturating_sub(m);
        }
        r.reevaluated += rep.reevaluated;
        r.total_s += rep.total.as_secs_f64();
        r.response_s += rep.total.as_secs_f64();
        if keep_per_update {
            r.per_update.push(UpdateTiming {
                kind,
                response_us: us(rep.total),
                maintenance_us: 0.0,
                total_us: us(rep.total),
            });
        }
    }
    r
}

/// First query whose answers differ between the two, with a short reason.
pub fn compare_answers(engine: &Engine, naive: &NaiveBaseline) -> Option<String> {
    if engine.query_count() != naive.query_count() {
        return Some(format!(
            "{} vs {} queries",
            engine.query_count(),
            naive.query_count()
        ));
    }
    let names = |g: &crate::store::KnowledgeGraph, row: &[crate::store::NodeId]| -> Vec<String> {
        row.iter()
            .map(|&n| g.dictionary().node_name(n).to_string())
            .collect()
    };
    for q in 0..engine.query_count() {
        let mut a: Vec<(Vec<String>, String)> = engine
            .answers(q)
            .iter()
            .map(|(r, p)| (names(engine.graph(), r), p.to_string()))
            .collect();
        let mut b: Vec<(Vec<String>, String)> = naive
            .answers(q)
            .iter()
            .map(|(r, p)| (names(naive.graph(), r), p.to_string()))
            .collect();
        a.sort();
        b.sort();
        if a != b {
            let first = a
                .iter()
                .zip(&b)
                .find(|(x, y)| x != y)
                .map(|(x, y)| format!("{x:?} vs {y:?}"))
                .unwrap_or_else(|| format!("{} vs {} rows", a.len(), b.len()));
            return Some(format!("query {q}: {first}"));
        }
    }
    None
}

#[derive(Debug, Clone, Serialize)]
pub struct PresetTiming {
    pub preset: &'static str,
    pub delete_ratio: f64,
    /// Median over repetitions of the trimmed mean time per update.
    pub mean_update_us: f64,
    pub runs_us: Vec<f64>,
}

/// Share of the slowest updates dropped from each run's mean. These are
/// scheduler and page-fault spikes of several milliseconds.
pub const TRIM_FRACTION: f64 = 0.01;

/// Mean of `xs` without its largest `TRIM_FRACTION`.
pub fn upper_trimmed_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let keep = v.len() - (v.len() as f64 * TRIM_FRACTION) as usize;
    v[..keep].iter().sum::<f64>() / keep as f64
}

/// Per-update time of the incremental engine for every preset.
///
/// Repetitions run round-robin over the presets on fresh copies of the
/// engine after one discarded warm-up pass, and the median is reported.
pub fn preset_timings(
    setup: &BenchSetup,
    size: usize,
    seed: u64,
    reps: usize,
) -> Vec<PresetTiming> {
    let workloads: Vec<Vec<Update>> = Preset::ALL
        .iter()
        .map(|p| setup.workload(size, p.delete_ratio(), seed))
        .collect();
    run_incremental(&mut setup.engine.clone(), &workloads[0], false);
    let mut runs: Vec<Vec<f64>> = vec![Vec::new(); Preset::ALL.len()];
    for _ in 0..reps.max(1) {
        for (i, wl) in workloads.iter().enumerate() {
            let mut engine = setup.engine.clone();
            let r = run_incremental(&mut engine, wl, true);
            let times: Vec<f64> = r.per_update.iter().map(|t| t.total_us).collect();
            runs[i].push(upper_trimmed_mean(&times));
        }
    }
    Preset::ALL
        .iter()
        .zip(runs)
        .map(|(p, runs_us)| PresetTiming {
            preset: p.name(),
            delete_ratio: p.delete_ratio(),
            mean_update_us: median(&runs_us),
            runs_us,
        })
        .collect()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => 0.0,
        n if n % 2 == 1 => v[n / 2],
        n => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_setup_modes_agree() {
        let graph = GraphShape {
            nodes: 60,
            predicates: 4,
            edges: 400,
            skew: 1.2,
        };
        let mut s = synthetic_setup(&graph, &SYNTHETIC_QUERIES, 5, 11);
        assert_eq!(s.queries.len(), 5);
        let wl = s.workload(300, 0.5, 2);
        let inc = run_incremental(&mut s.engine, &wl, true);
        let nav = run_naive(&mut s.naive, &wl, false);
        assert_eq!((inc.inserts, inc.deletes), (150, 150));
        assert_eq!(inc.per_update.len(), 300);
        assert_eq!(inc.skipped, 0);
        assert!(nav.reevaluated > 0);
        assert_eq!(compare_answers(&s.engine, &s.naive), None);
        for t in &inc.per_update {
            assert!(t.response_us + t.maintenance_us <= t.total_us + 1e-6);
        }
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0]), 2.5);
        assert_eq!(median(&[]), 0.0);
        let mut xs: Vec<f64> = vec![1.0; 199];
        xs.push(1000.0);
        assert_eq!(upper_trimmed_mean(&xs), 1.0);
    }
}
