//! Subqueries: a query minus one triple pattern, split into the components
//! that the removed pattern used to join.

use serde::Serialize;
use thiserror::Error;

use crate::query::{components, QueryGraph, Term, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SubqueryType {
    /// One component, hanging off a single endpoint of the removed pattern.
    I,
    /// Two components, one of them a single pattern.
    II,
    /// Two components, neither of which makes the split Type II.
    III,
    /// One component touching both endpoints.
    IV,
}

/// Which endpoints of the removed pattern a component contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Attach {
    Subject,
    Object,
    Both,
}

#[derive(Debug, Clone, Serialize)]
pub struct Subquery {
    /// Ordinal of the removed pattern.
    pub removed: usize,
    pub kind: SubqueryType,
    /// Annotated component: pattern ordinals, ascending.
    pub sq1: Vec<usize>,
    pub sq1_attach: Attach,
    /// Second component. For Type II this is the lone pattern checked by
    /// store lookup rather than annotation.
    pub sq2: Option<Vec<usize>>,
    pub sq2_attach: Option<Attach>,
}

impl Subquery {
    pub fn size(&self) -> usize {
        self.sq1.len() + self.sq2.as_ref().map_or(0, Vec::len)
    }

    /// All remaining pattern ordinals, ascending.
    pub fn patterns(&self) -> Vec<usize> {
        let mut all = self.sq1.clone();
        all.extend(self.sq2.iter().flatten());
        all.sort_unstable();
        all
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SubqueryError {
    #[error("a single-pattern query has no subqueries")]
    SinglePattern,
    #[error("removing pattern {0} leaves a component detached from it")]
    Detached(usize),
}

fn attach_of(q: &QueryGraph, removed: usize, comp: &[usize]) -> Option<Attach> {
    let t = &q.patterns[removed];
    let touches = |term: Term<_>| {
        term.var()
            .is_some_and(|v: VarId| comp.iter().any(|&k| q.patterns[k].has_var(v)))
    };
    match (touches(t.subject), touches(t.object)) {
        (true, true) => Some(Attach::Both),
        (true, false) => Some(Attach::Subject),
        (false, true) => Some(Attach::Object),
        (false, false) => None,
    }
}

/// One subquery per pattern, in ordinal order.
pub fn generate_subqueries(q: &QueryGraph) -> Result<Vec<Subquery>, SubqueryError> {
    let n = q.len();
    if n < 2 {
        return Err(SubqueryError::SinglePattern);
    }
    (0..n)
        .map(|removed| {
            let rest: Vec<usize> = (0..n).filter(|&k| k != removed).collect();
            let comps = components(&q.patterns, &rest);
            let mut attached = Vec::with_capacity(comps.len());
            for c in comps {
                let a = attach_of(q, removed, &c).ok_or(SubqueryError::Detached(removed))?;
                attached.push((c, a));
            }
            Ok(match attached.len() {
                1 => {
                    let (c, a) = attached.pop().unwrap();
                    Subquery {
                        removed,
                        kind: if a == Attach::Both {
                            SubqueryType::IV
                        } else {
                            SubqueryType::I
                        },
                        sq1: c,
                        sq1_attach: a,
                        sq2: None,
                        sq2_attach: None,
                    }
                }
                2 => {
                    // A component touching both endpoints would have merged them.
                    let (b, ba) = attached.pop().unwrap();
                    let (a, aa) = attached.pop().unwrap();
                    let ((a, aa), (b, ba)) = if aa == Attach::Subject {
                        ((a, aa), (b, ba))
                    } else {
                        ((b, ba), (a, aa))
                    };
                    let type_ii = (a.len() == 1) != (b.len() == 1);
                    if type_ii {
                        let ((big, bga), (lone, la)) = if a.len() == 1 {
                            ((b, ba), (a, aa))
                        } else {
                            ((a, aa), (b, ba))
                        };
                        Subquery {
                            removed,
                            kind: SubqueryType::II,
                            sq1: big,
                            sq1_attach: bga,
                            sq2: Some(lone),
                            sq2_attach: Some(la),
                        }
                    } else {
                        Subquery {
                            removed,
                            kind: SubqueryType::III,
                            sq1: a,
                            sq1_attach: aa,
                            sq2: Some(b),
                            sq2_attach: Some(ba),
                        }
                    }
                }
                _ => return Err(SubqueryError::Detached(removed)),
            })
        })
        .collect()
}

/// Upper bound on connection points a subquery creates, given the result
/// counts of its components.
pub fn expected_connection_point_bound(kind: SubqueryType, a1: usize, a2: usize) -> usize {
    match kind {
        SubqueryType::I | SubqueryType::II => a1,
        SubqueryType::III => a1 + a2,
        SubqueryType::IV => 2 * a1,
    }
}
