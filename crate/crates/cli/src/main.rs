mod session;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use kgprov_core::harness::{
    compare_answers, format_workload, median, parse_workload, run_incremental, run_naive,
    run_verify, trial_seed, BenchReport, Preset, Update, VerifyConfig,
};
use kgprov_core::maintenance::{Engine, Fault};
use kgprov_core::planner::coverage;
use kgprov_core::query::pretty_print;
use kgprov_core::NodeId;
use serde_json::{json, Value};

use session::{load_graph, Session, Sources};

#[derive(Parser)]
#[command(
    name = "kgprov",
    version,
    about = "Standing graph-pattern queries with provenance polynomials"
)]
struct Cli {
    /// N-Triples graph to load.
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// Query files to register, in order; repeat or separate with commas.
    #[arg(long = "queries", value_delimiter = ',', global = true)]
    queries: Vec<PathBuf>,
    /// File listing query files, one per line.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// JSON predicate hints: {"pred": {"one_to_one": true, "asymmetric": false}}.
    #[arg(long, global = true)]
    meta: Option<PathBuf>,
    /// Print JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a graph and print its size.
    Load { file: PathBuf },
    /// Register query files and print their initial answers.
    Register { files: Vec<PathBuf> },
    /// Write a random update workload over the registered queries' predicates.
    GenWorkload {
        #[arg(long)]
        size: usize,
        #[arg(long, conflicts_with = "preset")]
        delete_ratio: Option<f64>,
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a workload and report timings.
    Apply {
        workload: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Incremental)]
        mode: ModeArg,
        /// Also run the other mode and compare final answers.
        #[arg(long)]
        verify: bool,
        /// Repetitions; timings are medians.
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Write the JSON report here as well.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Print every answer change of the first run.
        #[arg(long)]
        trace: bool,
    },
    /// Randomized end-to-end checks against a from-scratch evaluator.
    Verify {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 300)]
        max_edges: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        updates: usize,
        #[arg(long, default_value_t = 5)]
        max_queries: usize,
        #[arg(long, default_value_t = 5)]
        max_patterns: usize,
        /// Lemma checks before every n-th insertion; 0 disables them.
        #[arg(long, default_value_t = 5)]
        lemma_every: usize,
        #[arg(long, value_enum)]
        inject_fault: Option<FaultArg>,
    },
    /// Print engine state as JSON.
    Dump {
        #[arg(value_enum)]
        what: DumpArg,
        /// Apply this workload first.
        #[arg(long)]
        after: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Incremental,
    Naive,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    InsertionHeavy,
    InsertionLeaning,
    Balanced,
    DeletionLeaning,
    DeletionHeavy,
}

impl PresetArg {
    fn preset(self) -> Preset {
        match self {
            PresetArg::InsertionHeavy => Preset::InsertionHeavy,
            PresetArg::InsertionLeaning => Preset::InsertionLeaning,
            PresetArg::Balanced => Preset::Balanced,
            PresetArg::DeletionLeaning => Preset::DeletionLeaning,
            PresetArg::DeletionHeavy => Preset::DeletionHeavy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    SkipPrune,
}

#[derive(Clone, Copy, ValueEnum)]
enum DumpArg {
    Answers,
    Annotations,
    Plan,
    Stats,
}

fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut w: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            w[i] = w[i].max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let s: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{c:<w$}", w = w[i]))
            .collect();
        s.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    out += &line(
        w.iter()
            .map(|&n| "-".repeat(n))
            .collect::<Vec<_>>()
            .iter()
            .map(String::as_str)
            .collect(),
    );
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}

fn names(engine: &Engine, row: &[NodeId]) -> Vec<String> {
    row.iter()
        .map(|&n| engine.graph().dictionary().node_name(n).to_string())
        .collect()
}

fn read_workload(path: &Path) -> Result<Vec<Update>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_workload(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_load(cli: &Cli, file: &Path) -> Result<()> {
    let g = load_graph(file)?;
    let v = json!({
        "file": file.display().to_string(),
        "vertices": g.vertex_count(),
        "edges": g.edge_count(),
        "predicates": g.predicate_count(),
    });
    if cli.json {
        println!("{v}");
    } else {
        print!(
            "{}",
            table(
                &["vertices", "edges", "predicates"],
                &[vec![
                    g.vertex_count().to_string(),
                    g.edge_count().to_string(),
                    g.predicate_count().to_string()
                ]],
            )
        );
    }
    Ok(())
}

fn cmd_register(cli: &Cli, sources: &Sources, files: &[PathBuf]) -> Result<()> {
    let s = sources.open_with(files)?;
    let mut out = Vec::new();
    for ((path, _), r) in s.queries.iter().zip(&s.receipts) {
        let qg = s.engine.query(r.query);
        let answers: Vec<Value> = r
            .answers
            .iter()
            .map(|a| json!({"bindings": names(&s.engine, &a.bindings), "provenance": a.provenance.to_string()}))
            .collect();
        out.push(json!({
            "query": r.query,
            "file": path.display().to_string(),
            "text": qg.to_sparql(s.engine.graph().dictionary()),
            "projection": qg.projection.iter().map(|&v| qg.var_name(v)).collect::<Vec<_>>(),
            "classification": r.classification,
            "subqueries": r.subqueries,
            "annotations": r.annotations,
            "local_plan_nodes": r.local_plan_nodes,
            "created_plan_nodes": r.created_plan_nodes,
            "answers": answers,
        }));
    }
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(());
    }
    let rows: Vec<Vec<String>> = s
        .receipts
        .iter()
        .zip(&s.queries)
        .map(|(r, (p, _))| {
            vec![
                r.query.to_string(),
                p.display().to_string(),
                if r.classification.is_multimap() {
                    "multimap"
                } else {
                    "regular"
                }
                .to_string(),
                r.subqueries.len().to_string(),
                r.answers.len().to_string(),
                r.annotations.to_string(),
                r.created_plan_nodes.to_string(),
            ]
        })
        .collect();
    print!(
        "{}",
        table(
            &[
                "query",
                "file",
                "class",
                "subqueries",
                "answers",
                "annotations",
                "new plan nodes"
            ],
            &rows
        )
    );
    for r in &s.receipts {
        let qg = s.engine.query(r.query);
        let head: Vec<&str> = qg.projection.iter().map(|&v| qg.var_name(v)).collect();
        println!("\nquery {}:", r.query);
        let rows: Vec<Vec<String>> = r
            .answers
            .iter()
            .map(|a| {
                let mut row = names(&s.engine, &a.bindings);
                row.push(a.provenance.to_string());
                row
            })
            .collect();
        let mut headers = head.clone();
        headers.push("provenance");
        print!("{}", table(&headers, &rows));
    }
    Ok(())
}

fn cmd_gen_workload(
    sources: &Sources,
    size: usize,
    delete_ratio: Option<f64>,
    preset: Option<PresetArg>,
    seed: u64,
    out: &Option<PathBuf>,
) -> Result<()> {
    let ratio = match (delete_ratio, preset) {
        (Some(r), _) => r,
        (None, Some(p)) => p.preset().delete_ratio(),
        (None, None) => Preset::Balanced.delete_ratio(),
    };
    if !(0.0..=1.0).contains(&ratio) {
        bail!("--delete-ratio must lie in [0, 1]");
    }
    let s = sources.open()?;
    let pool = s.engine.query_predicates().into_iter().collect();
    let wl = kgprov_core::harness::generate_workload(
        s.engine.graph(),
        &kgprov_core::harness::WorkloadConfig {
            size,
            delete_ratio: ratio,
            seed,
            predicate_pool: pool,
        },
    )?;
    let text = format_workload(&wl);
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn summarize(runs: &[BenchReport], wl_len: usize) -> Value {
    let first = &runs[0];
    let med = |f: fn(&BenchReport) -> f64| median(&runs.iter().map(f).collect::<Vec<_>>());
    json!({
        "mode": first.mode,
        "updates": wl_len,
        "inserts": first.inserts,
        "deletes": first.deletes,
        "skipped": first.skipped,
        "answers_added": first.answers_added,
        "answers_removed": first.answers_removed,
        "answers_changed": first.answers_changed,
        "reevaluated": first.reevaluated,
        "reps": runs.len(),
        "total_s": med(|r| r.total_s),
        "response_s": med(|r| r.response_s),
        "maintenance_s": med(|r| r.maintenance_s),
        "mean_update_us": med(BenchReport::mean_update_us),
        "runs_total_s": runs.iter().map(|r| r.total_s).collect::<Vec<_>>(),
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_apply(
    cli: &Cli,
    sources: &Sources,
    path: &Path,
    mode: ModeArg,
    verify: bool,
    reps: usize,
    report: &Option<PathBuf>,
    trace: bool,
) -> Result<bool> {
    let s = sources.open()?;
    let wl = read_workload(path)?;
    let reps = reps.max(1);
    let mut engine = s.engine.clone();
    let mut naive = s.naive.clone();
    let mut runs = Vec::new();
    let mut traced = Vec::new();
    for rep in 0..reps {
        match mode {
            ModeArg::Incremental => {
                let mut e = s.engine.clone();
                if trace && rep == 0 {
                    let mut r = Vec::new();
                    for u in &wl {
                        let rep = u.apply(&mut e);
                        r.push(json!({
                            "update": u.to_string(),
                            "edge": rep.edge.map(|x| x.id.to_string()),
                            "changes": rep.changes.iter().map(|c| json!({
                                "query": c.query,
                                "bindings": names(&e, &c.bindings),
                                "before": c.before.to_string(),
                                "after": c.after.to_string(),
                            })).collect::<Vec<_>>(),
                        }));
                    }
                    traced = r;
                    e = s.engine.clone();
                }
                runs.push(run_incremental(&mut e, &wl, false));
                engine = e;
            }
            ModeArg::Naive => {
                let mut n = s.naive.clone();
                runs.push(run_naive(&mut n, &wl, false));
                naive = n;
            }
        }
    }
    if runs[0].skipped > 0 {
        eprintln!(
            "warning: {} deletions named no live edge and were skipped",
            runs[0].skipped
        );
    }
    let mut summary = summarize(&runs, wl.len());
    let mut agree = true;
    if verify {
        match mode {
            ModeArg::Incremental => {
                run_naive(&mut naive, &wl, false);
            }
            ModeArg::Naive => {
                run_incremental(&mut engine, &wl, false);
            }
        }
        let diff = compare_answers(&engine, &naive);
        agree = diff.is_none();
        summary["verify"] = json!({ "modes_agree": agree, "difference": diff });
    }
    if trace {
        summary["trace"] = Value::Array(traced);
    }
    if let Some(p) = report {
        std::fs::write(p, serde_json::to_string_pretty(&summary)?)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        let f = |k: &str| summary[k].to_string();
        let secs = |k: &str| format!("{:.6}", summary[k].as_f64().unwrap_or(0.0));
        print!(
            "{}",
            table(
                &[
                    "mode",
                    "updates",
                    "inserts",
                    "deletes",
                    "skipped",
                    "added",
                    "removed",
                    "changed",
                    "total s",
                    "response s",
                    "maintenance s",
                    "us/update"
                ],
                &[vec![
                    summary["mode"].as_str().unwrap_or_default().to_string(),
                    f("updates"),
                    f("inserts"),
                    f("deletes"),
                    f("skipped"),
                    f("answers_added"),
                    f("answers_removed"),
                    f("answers_changed"),
                    secs("total_s"),
                    secs("response_s"),
                    secs("maintenance_s"),
                    format!("{:.2}", summary["mean_update_us"].as_f64().unwrap_or(0.0)),
                ]],
            )
        );
        if trace {
            for t in summary["trace"].as_array().into_iter().flatten() {
                println!("{}", t);
            }
        }
        if verify {
            match summary["verify"]["difference"].as_str() {
                None => println!("modes agree"),
                Some(d) => println!("modes DISAGREE: {d}"),
            }
        }
    }
    Ok(agree)
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    cli: &Cli,
    trials: usize,
    max_edges: usize,
    seed: u64,
    updates: usize,
    max_queries: usize,
    max_patterns: usize,
    lemma_every: usize,
    fault: Option<FaultArg>,
) -> Result<bool> {
    let cfg = VerifyConfig {
        trials,
        max_edges,
        seed,
        updates,
        max_queries,
        max_patterns,
        lemma_every,
        fault: fault.map(|FaultArg::SkipPrune| Fault::SkipPrune),
        ..VerifyConfig::default()
    };
    let r = run_verify(&cfg);
    if cli.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({ "config": cfg, "report": r }))?
        );
    } else {
        print!(
            "{}",
            table(
                &[
                    "trials",
                    "queries",
                    "updates",
                    "comparisons",
                    "1:1",
                    "1:m",
                    "completed",
                    "seconds"
                ],
                &[vec![
                    r.trials.to_string(),
                    r.queries.to_string(),
                    r.updates.to_string(),
                    r.comparisons.to_string(),
                    r.lemmas.one_to_one.to_string(),
                    r.lemmas.one_to_many.to_string(),
                    r.lemmas.completed.to_string(),
                    format!("{:.2}", r.elapsed.as_secs_f64()),
                ]],
            )
        );
        match &r.failure {
            None => println!("PASS"),
            Some(f) => {
                let step = f.step.map(|s| format!(" step {s}")).unwrap_or_default();
                println!("FAIL trial {}{step}: {}", f.trial, f.detail);
                println!(
                    "reproduce with: kgprov verify --trials 1 --seed {}",
                    f.trial_seed
                );
            }
        }
    }
    debug_assert!(r
        .failure
        .as_ref()
        .is_none_or(|f| f.trial_seed == trial_seed(seed, f.trial)));
    Ok(r.passed())
}

fn cmd_dump(sources: &Sources, what: DumpArg, after: &Option<PathBuf>) -> Result<()> {
    let Session {
        mut engine,
        queries,
        ..
    } = sources.open()?;
    if let Some(p) = after {
        for u in read_workload(p)? {
            u.apply(&mut engine);
        }
    }
    let out = std::io::stdout();
    let mut out = out.lock();
    let d = engine.graph().dictionary().clone();
    match what {
        DumpArg::Answers => {
            for q in 0..engine.query_count() {
                let qg = engine.query(q);
                for (row, poly) in engine.answers(q) {
                    let bindings: serde_json::Map<String, Value> = qg
                        .projection
                        .iter()
                        .zip(row)
                        .map(|(&v, &n)| (qg.var_name(v).to_string(), Value::from(d.node_name(n))))
                        .collect();
                    writeln!(
                        out,
                        "{}",
                        json!({"query": q, "bindings": bindings, "provenance": poly.to_string()})
                    )?;
                }
            }
        }
        DumpArg::Annotations => {
            for a in engine.annotations() {
                writeln!(
                    out,
                    "{}",
                    json!({
                        "node": d.node_name(a.node),
                        "exp_rel": d.predicate_name(a.exp_rel),
                        "dir": a.dir,
                        "query": a.query,
                        "removed": a.removed,
                        "side": a.side,
                        "partner": a.partner.map(|n| d.node_name(n)),
                        "result": a.result.iter().map(|&n| d.node_name(n)).collect::<Vec<_>>(),
                        "provenance": a.poly.to_string(),
                    })
                )?;
            }
        }
        DumpArg::Plan => {
            let plan = engine.plan();
            let nodes: Vec<Value> = plan
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    json!({
                        "id": i,
                        "expression": pretty_print(&n.form, &d),
                        "arity": n.arity(),
                        "rows": n.table.len(),
                        "estimate": n.estimate,
                        "join": n.join,
                        "parents": plan.parents(i),
                    })
                })
                .collect();
            let v = json!({
                "nodes": nodes,
                "roots": plan.roots(),
                "queries": queries.iter().map(|(p, _)| p.display().to_string()).collect::<Vec<_>>(),
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
        }
        DumpArg::Stats => {
            let g = engine.graph();
            let mut v = json!({
                "vertices": g.vertex_count(),
                "edges": g.edge_count(),
                "predicates": g.predicate_count(),
                "queries": engine.query_count(),
                "plan_nodes": engine.plan().len(),
                "non_leaf_plan_nodes": engine.plan().non_leaf_count(),
                "coverage": coverage(engine.plan()),
                "annotations": engine.annotation_count(),
                "answers": (0..engine.query_count()).map(|q| engine.answers(q).len()).sum::<usize>(),
            });
            v["statistics"] = serde_json::to_value(engine.statistics().summary())?;
            writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    let sources = Sources {
        graph: cli.graph.clone(),
        queries: cli.queries.clone(),
        manifest: cli.manifest.clone(),
        meta: cli.meta.clone(),
    };
    match &cli.command {
        Command::Load { file } => cmd_load(cli, file).map(|_| true),
        Command::Register { files } => cmd_register(cli, &sources, files).map(|_| true),
        Command::GenWorkload {
            size,
            delete_ratio,
            preset,
            seed,
            out,
        } => cmd_gen_workload(&sources, *size, *delete_ratio, *preset, *seed, out).map(|_| true),
        Command::Apply {
            workload,
            mode,
            verify,
            reps,
            report,
            trace,
        } => cmd_apply(
            cli, &sources, workload, *mode, *verify, *reps, report, *trace,
        ),
        Command::Verify {
            trials,
            max_edges,
            seed,
            updates,
            max_queries,
            max_patterns,
            lemma_every,
            inject_fault,
        } => cmd_verify(
            cli,
            *trials,
            *max_edges,
            *seed,
            *updates,
            *max_queries,
            *max_patterns,
            *lemma_every,
            *inject_fault,
        ),
        Command::Dump { what, after } => cmd_dump(&sources, *what, after).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e)
            if e.downcast_ref::<std::io::Error>()
                .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
