use std::collections::{BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::store::{Edge, EdgeId, KnowledgeGraph, NodeId, PredicateId};

#[derive(Debug, Clone, Serialize)]
pub struct GraphShape {
    pub nodes: usize,
    pub predicates: usize,
    pub edges: usize,
    /// Exponent applied to uniform draws for node and predicate choice;
    /// 1.0 is uniform, larger values concentrate edges on low indexes.
    pub skew: f64,
}

fn skewed<R: Rng>(rng: &mut R, n: usize, skew: f64) -> usize {
    let u: f64 = rng.gen();
    ((u.powf(skew) * n as f64) as usize).min(n - 1)
}

/// Random multigraph over nodes `n0..` and predicates `p0..`.
pub fn random_graph<R: Rng>(rng: &mut R, shape: &GraphShape) -> KnowledgeGraph {
    let mut g = KnowledgeGraph::new();
    let nodes: Vec<NodeId> = (0..shape.nodes)
        .map(|i| g.dictionary_mut().intern_node(&format!("n{i}")))
        .collect();
    let preds: Vec<PredicateId> = (0..shape.predicates)
        .map(|i| g.dictionary_mut().intern_predicate(&format!("p{i}")))
        .collect();
    for _ in 0..shape.edges {
        let s = nodes[skewed(rng, nodes.len(), shape.skew)];
        let o = nodes[rng.gen_range(0..nodes.len())];
        let p = preds[skewed(rng, preds.len(), shape.skew)];
        g.insert_edge(s, p, o);
    }
    g
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryShape {
    pub min_patterns: usize,
    pub max_patterns: usize,
    /// Chance that a node touched by a single pattern becomes a constant.
    pub constant_prob: f64,
    /// Chance of drawing predicates at random instead of walking the graph.
    pub free_prob: f64,
}

/// A connected query in SPARQL text.
///
/// Usually the query is read off a random walk in `g`, so it has at least one
/// answer when generated; with `free_prob` the shape is grown without looking
/// at the data.
pub fn random_query<R: Rng>(rng: &mut R, g: &KnowledgeGraph, shape: &QueryShape) -> Option<String> {
    let n = rng.gen_range(shape.min_patterns..=shape.max_patterns);
    let edges: Vec<&Edge> = g.edges().collect();
    if edges.is_empty() || n == 0 {
        return None;
    }
    let free = rng.gen_bool(shape.free_prob);
    let triples = if free {
        free_shape(rng, g, n)
    } else {
        walk(rng, g, &edges, n)?
    };
    Some(render(rng, g, &triples, shape.constant_prob, !free))
}

/// Triples over placeholder node ids; only their sharing structure matters.
type Triple = (NodeId, PredicateId, NodeId);

fn walk<R: Rng>(rng: &mut R, g: &KnowledgeGraph, edges: &[&Edge], n: usize) -> Option<Vec<Triple>> {
    let first = edges[rng.gen_range(0..edges.len())];
    let mut used: HashSet<EdgeId> = HashSet::from([first.id]);
    let mut out = vec![(first.subject, first.predicate, first.object)];
    let mut seen: Vec<NodeId> = vec![first.subject];
    if first.object != first.subject {
        seen.push(first.object);
    }
    'grow: while out.len() < n {
        for _ in 0..16 {
            let at = seen[rng.gen_range(0..seen.len())];
            let incident: Vec<&Edge> = g
                .lookup(Some(at), None, None)
                .chain(g.lookup(None, None, Some(at)))
                .filter(|e| !used.contains(&e.id))
                .collect();
            if let Some(e) = incident.choose(rng) {
                used.insert(e.id);
                out.push((e.subject, e.predicate, e.object));
                for v in [e.subject, e.object] {
                    if !seen.contains(&v) {
                        seen.push(v);
                    }
                }
                continue 'grow;
            }
        }
        return None;
    }
    Some(out)
}

fn free_shape<R: Rng>(rng: &mut R, g: &KnowledgeGraph, n: usize) -> Vec<Triple> {
    let preds: Vec<PredicateId> = g.predicates().collect();
    let mut vars = 2u32;
    let pick = |rng: &mut R| preds[rng.gen_range(0..preds.len())];
    let mut out = vec![(NodeId(0), pick(rng), NodeId(1))];
    while out.len() < n {
        let at = NodeId(rng.gen_range(0..vars));
        let other = if rng.gen_bool(0.2) {
            NodeId(rng.gen_range(0..vars))
        } else {
            vars += 1;
            NodeId(vars - 1)
        };
        let p = pick(rng);
        out.push(if rng.gen_bool(0.5) {
            (at, p, other)
        } else {
            (other, p, at)
        });
    }
    out
}

fn render<R: Rng>(
    rng: &mut R,
    g: &KnowledgeGraph,
    triples: &[Triple],
    constant_prob: f64,
    real: bool,
) -> String {
    let mut degree: HashMap<NodeId, usize> = HashMap::new();
    for &(s, _, o) in triples {
        *degree.entry(s).or_default() += 1;
        if o != s {
            *degree.entry(o).or_default() += 1;
        }
    }
    let mut order: Vec<NodeId> = Vec::new();
    for &(s, _, o) in triples {
        for v in [s, o] {
            if !order.contains(&v) {
                order.push(v);
            }
        }
    }
    // Constants only on nodes of a single pattern keep the query connected,
    // and at least one variable must stay.
    let mut constant: BTreeSet<NodeId> = BTreeSet::new();
    for &v in &order {
        if degree[&v] == 1 && rng.gen_bool(constant_prob) && constant.len() + 2 <= order.len() {
            constant.insert(v);
        }
    }
    if triples.len() == 1 {
        constant.retain(|_| false);
    }
    let d = g.dictionary();
    let mut names: HashMap<NodeId, String> = HashMap::new();
    let mut vars = Vec::new();
    for &v in &order {
        let name = if constant.contains(&v) {
            // Free shapes use placeholder ids, so draw a real vertex instead.
            let node = if real {
                v
            } else {
                let all: Vec<NodeId> = g.vertices().collect();
                all[rng.gen_range(0..all.len())]
            };
            crate::ntriples::format_term(d.node_name(node))
        } else {
            let name = format!("?v{}", vars.len());
            vars.push(name.clone());
            name
        };
        names.insert(v, name);
    }
    let body: Vec<String> = triples
        .iter()
        .map(|&(s, p, o)| {
            format!(
                "{} {} {}",
                names[&s],
                crate::ntriples::format_term(d.predicate_name(p)),
                names[&o]
            )
        })
        .collect();
    let projection = if rng.gen_bool(0.3) {
        "*".to_string()
    } else {
        let mut chosen: Vec<&String> = vars.iter().filter(|_| rng.gen_bool(0.5)).collect();
        if chosen.is_empty() {
            chosen.push(&vars[rng.gen_range(0..vars.len())]);
        }
        chosen
            .iter()
            .map(|s| s.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    };
    format!("SELECT {projection} WHERE {{ {} }}", body.join(" . "))
}
