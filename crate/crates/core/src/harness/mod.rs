//! Workloads, synthetic data, the re-execution baseline and randomized
//! verification against a nested-loop evaluator.

mod bench;
mod naive;
mod reference;
mod synthetic;
mod verify;
mod workload;

pub use bench::{
    compare_answers, median, preset_timings, run_incremental, run_naive, synthetic_setup,
    upper_trimmed_mean, BenchReport, BenchSetup, Mode, PresetTiming, UpdateTiming, SYNTHETIC_GRAPH,
    SYNTHETIC_QUERIES, TRIM_FRACTION,
};
pub use naive::{NaiveBaseline, NaiveReport};
pub use reference::{enumerate_matches, match_binding, monomial_of, reference_answers};
pub use synthetic::{random_graph, random_query, GraphShape, QueryShape};
pub use verify::{
    check_lemmas_and_insert, run_verify, trial_seed, LemmaStats, VerifyConfig, VerifyFailure,
    VerifyReport,
};
pub use workload::{
    format_workload, generate_workload, parse_workload, Preset, Update, WorkloadConfig,
    WorkloadError,
};
