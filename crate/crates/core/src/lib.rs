//! Provenance-aware maintenance of standing graph-pattern queries over a
//! dynamic knowledge graph.

pub mod eval;
pub mod harness;
pub mod maintenance;
pub mod ntriples;
pub mod planner;
pub mod provenance;
pub mod query;
pub mod store;
pub mod subquery;

pub use provenance::{Monomial, Polynomial};
pub use store::{Dictionary, Edge, EdgeId, KnowledgeGraph, NodeId, PredicateId};
