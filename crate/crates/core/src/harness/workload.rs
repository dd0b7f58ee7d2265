use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::maintenance::{Engine, UpdateReport};
use crate::ntriples::format_term;
use crate::store::{EdgeId, KnowledgeGraph, NodeId, PredicateId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Update {
    Insert {
        subject: String,
        predicate: String,
        object: String,
    },
    DeleteId(EdgeId),
    /// First matching edge in id order.
    DeleteTriple {
        subject: String,
        predicate: String,
        object: String,
    },
}

impl Update {
    pub fn is_insert(&self) -> bool {
        matches!(self, Update::Insert { .. })
    }

    pub fn apply(&self, engine: &mut Engine) -> UpdateReport {
        match self {
            Update::Insert {
                subject,
                predicate,
                object,
            } => engine.insert_triple(subject, predicate, object),
            Update::DeleteId(id) => engine.delete_edge(*id),
            Update::DeleteTriple {
                subject,
                predicate,
                object,
            } => engine.delete_triple(subject, predicate, object),
        }
    }
}

impl fmt::Display for Update {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Update::Insert {
                subject,
                predicate,
                object,
            } => write!(
                f,
                "+ {} {} {}",
                format_term(subject),
                format_term(predicate),
                format_term(object)
            ),
            Update::DeleteId(id) => write!(f, "- {id}"),
            Update::DeleteTriple {
                subject,
                predicate,
                object,
            } => write!(
                f,
                "- {} {} {}",
                format_term(subject),
                format_term(predicate),
                format_term(object)
            ),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorkloadError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("no predicate of any registered query to draw updates from")]
    EmptyPool,
}

/// Parses `+ <s> <p> <o>`, `- e<id>` and `- <s> <p> <o>` lines. Blank lines
/// and `#` comments are skipped.
pub fn parse_workload(text: &str) -> Result<Vec<Update>, WorkloadError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: &str| WorkloadError::Syntax {
            line: i + 1,
            message: message.to_string(),
        };
        let (op, rest) = line.split_at(1);
        let rest = rest.trim();
        let triple = || crate::ntriples::parse_triple(rest).map_err(|m| err(&m));
        match op {
            "+" => {
                let (subject, predicate, object) = triple()?;
                out.push(Update::Insert {
                    subject,
                    predicate,
                    object,
                });
            }
            "-" => {
                if let Some(num) = rest
                    .strip_prefix('e')
                    .filter(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
                {
                    out.push(Update::DeleteId(EdgeId(
                        num.parse().map_err(|_| err("edge id out of range"))?,
                    )));
                } else {
                    let (subject, predicate, object) = triple()?;
                    out.push(Update::DeleteTriple {
                        subject,
                        predicate,
                        object,
                    });
                }
            }
            _ => return Err(err("expected `+` or `-`")),
        }
    }
    Ok(out)
}

pub fn format_workload(updates: &[Update]) -> String {
    updates.iter().map(|u| format!("{u}\n")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Preset {
    InsertionHeavy,
    InsertionLeaning,
    Balanced,
    DeletionLeaning,
    DeletionHeavy,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::DeletionHeavy,
        Preset::DeletionLeaning,
        Preset::Balanced,
        Preset::InsertionLeaning,
        Preset::InsertionHeavy,
    ];

    pub fn delete_ratio(self) -> f64 {
        match self {
            Preset::InsertionHeavy => 0.1,
            Preset::InsertionLeaning => 0.3,
            Preset::Balanced => 0.5,
            Preset::DeletionLeaning => 0.7,
            Preset::DeletionHeavy => 0.9,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::InsertionHeavy => "insertion-heavy",
            Preset::InsertionLeaning => "insertion-leaning",
            Preset::Balanced => "balanced",
            Preset::DeletionLeaning => "deletion-leaning",
            Preset::DeletionHeavy => "deletion-heavy",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WorkloadConfig {
    pub size: usize,
    pub delete_ratio: f64,
    pub seed: u64,
    pub predicate_pool: Vec<PredicateId>,
}

/// Random updates over `g`: insertions join two vertices that are not yet
/// adjacent with a pool predicate, deletions remove a live pool edge. The
/// sequence is simulated on a copy of the graph so every deletion names an
/// edge that exists at that point.
pub fn generate_workload(
    g: &KnowledgeGraph,
    cfg: &WorkloadConfig,
) -> Result<Vec<Update>, WorkloadError> {
    if cfg.size == 0 {
        return Ok(Vec::new());
    }
    if cfg.predicate_pool.is_empty() {
        return Err(WorkloadError::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sim = g.clone();
    let deletes = ((cfg.size as f64) * cfg.delete_ratio.clamp(0.0, 1.0)).round() as usize;
    let mut ops: Vec<bool> = (0..cfg.size).map(|i| i < deletes).collect();
    ops.shuffle(&mut rng);

    let vertices: Vec<NodeId> = sim.vertices().collect();
    let mut live: Vec<EdgeId> = cfg
        .predicate_pool
        .iter()
        .flat_map(|&p| {
            sim.lookup(None, Some(p), None)
                .map(|e| e.id)
                .collect::<Vec<_>>()
        })
        .collect();
    live.sort();
    let mut out = Vec::with_capacity(cfg.size);
    for delete in ops {
        if delete && !live.is_empty() {
            let i = rng.gen_range(0..live.len());
            let id = live.swap_remove(i);
            sim.delete_edge(id);
            out.push(Update::DeleteId(id));
            continue;
        }
        let p = cfg.predicate_pool[rng.gen_range(0..cfg.predicate_pool.len())];
        let (s, o) = if vertices.len() < 2 {
            let d = sim.dictionary_mut();
            (d.intern_node("n0"), d.intern_node("n1"))
        } else {
            let mut pair = (vertices[0], vertices[1]);
            for _ in 0..64 {
                let (a, b) = (
                    vertices[rng.gen_range(0..vertices.len())],
                    vertices[rng.gen_range(0..vertices.len())],
                );
                pair = (a, b);
                if a != b && !sim.connected(a, b) {
                    break;
                }
            }
            pair
        };
        let id = sim.insert_edge(s, p, o);
        live.push(id);
        let d = sim.dictionary();
        out.push(Update::Insert {
            subject: d.node_name(s).to_string(),
            predicate: d.predicate_name(p).to_string(),
            object: d.node_name(o).to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = "+ <a> <p> <b>\n- e4\n- <a> <p> \"lit\"\n";
        let ups = parse_workload(text).unwrap();
        assert_eq!(ups.len(), 3);
        assert_eq!(ups[1], Update::DeleteId(EdgeId(4)));
        assert_eq!(format_workload(&ups), text);
    }

    #[test]
    fn bad_line_is_named() {
        let err = parse_workload("+ <a> <p> <b>\n* nope\n").unwrap_err();
        assert!(matches!(err, WorkloadError::Syntax { line: 2, .. }));
    }

    #[test]
    fn deterministic_and_sized() {
        let mut g = KnowledgeGraph::new();
        for i in 0..30 {
            g.insert_triple(&format!("n{i}"), "p", &format!("n{}", (i * 7 + 3) % 30));
        }
        let p = g.dictionary().predicate("p").unwrap();
        let cfg = WorkloadConfig {
            size: 200,
            delete_ratio: 0.5,
            seed: 9,
            predicate_pool: vec![p],
        };
        let a = generate_workload(&g, &cfg).unwrap();
        let b = generate_workload(&g, &cfg).unwrap();
        assert_eq!(format_workload(&a), format_workload(&b));
        assert_eq!(a.len(), 200);
        assert_eq!(a.iter().filter(|u| !u.is_insert()).count(), 100);
        let empty = WorkloadConfig {
            size: 0,
            ..cfg.clone()
        };
        assert!(generate_workload(&g, &empty).unwrap().is_empty());
        let nopool = WorkloadConfig {
            predicate_pool: vec![],
            ..cfg
        };
        assert_eq!(
            generate_workload(&g, &nopool).unwrap_err(),
            WorkloadError::EmptyPool
        );
    }
}
