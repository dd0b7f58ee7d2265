//! Inputs shared by the benchmarks.

use kgprov_core::harness::{synthetic_setup, BenchSetup, GraphShape, Update, SYNTHETIC_QUERIES};
use kgprov_core::{EdgeId, Monomial, Polynomial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small enough that cloning the engine per iteration stays cheap.
pub const SMALL_GRAPH: GraphShape = GraphShape {
    nodes: 2_000,
    predicates: 12,
    edges: 10_000,
    skew: 1.5,
};

pub fn small_setup(queries: usize) -> BenchSetup {
    synthetic_setup(&SMALL_GRAPH, &SYNTHETIC_QUERIES, queries, 7)
}

pub fn workload(setup: &BenchSetup, size: usize, delete_ratio: f64) -> Vec<Update> {
    setup.workload(size, delete_ratio, 1)
}

/// Sum of `terms` monomials of `degree` factors over `edges` symbols.
pub fn random_polynomial(seed: u64, terms: usize, degree: usize, edges: u64) -> Polynomial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Polynomial::from_terms((0..terms).map(|_| {
        let m = Monomial::from_factors((0..degree).map(|_| (EdgeId(rng.gen_range(1..=edges)), 1)));
        (m, 1)
    }))
}
