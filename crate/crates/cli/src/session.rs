use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kgprov_core::harness::NaiveBaseline;
use kgprov_core::maintenance::{Engine, RegistrationReceipt};
use kgprov_core::ntriples;
use kgprov_core::query::{parse_query, PredicateFlags, PredicateMetadata};
use kgprov_core::KnowledgeGraph;
use serde::Deserialize;

/// Where the graph, queries and predicate hints come from.
#[derive(Debug, Clone, Default)]
pub struct Sources {
    pub graph: Option<PathBuf>,
    pub queries: Vec<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlagsEntry {
    #[serde(default)]
    one_to_one: bool,
    #[serde(default)]
    asymmetric: bool,
}

pub struct Session {
    pub engine: Engine,
    pub naive: NaiveBaseline,
    /// Query file and its text, in registration order.
    pub queries: Vec<(PathBuf, String)>,
    pub receipts: Vec<RegistrationReceipt>,
}

pub fn load_graph(path: &Path) -> Result<KnowledgeGraph> {
    let mut g = KnowledgeGraph::new();
    ntriples::load_file(&mut g, path).with_context(|| format!("loading {}", path.display()))?;
    Ok(g)
}

/// Query files named by a manifest: one path per line, relative to the
/// manifest, `#` comments allowed.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

/// `{"predicate": {"one_to_one": bool, "asymmetric": bool}}`.
fn read_metadata(path: &Path, g: &mut KnowledgeGraph) -> Result<PredicateMetadata> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let entries: BTreeMap<String, FlagsEntry> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut meta = PredicateMetadata::default();
    for (name, f) in entries {
        let p = g.dictionary_mut().intern_predicate(&name);
        meta.set(
            p,
            PredicateFlags {
                one_to_one: f.one_to_one,
                asymmetric: f.asymmetric,
            },
        );
    }
    Ok(meta)
}

impl Sources {
    pub fn query_files(&self) -> Result<Vec<PathBuf>> {
        let mut files = self.queries.clone();
        if let Some(m) = &self.manifest {
            files.extend(read_manifest(m)?);
        }
        Ok(files)
    }

    pub fn open(&self) -> Result<Session> {
        self.open_with(&[])
    }

    /// Loads the graph and registers the configured queries followed by `extra`.
    pub fn open_with(&self, extra: &[PathBuf]) -> Result<Session> {
        let Some(graph) = &self.graph else {
            bail!("no graph given; pass --graph <file.nt>");
        };
        let mut g = load_graph(graph)?;
        let meta = match &self.meta {
            Some(p) => read_metadata(p, &mut g)?,
            None => PredicateMetadata::default(),
        };
        let mut engine = Engine::with_metadata(g.clone(), meta);
        let mut naive = NaiveBaseline::new(g);
        let mut queries = Vec::new();
        let mut receipts = Vec::new();
        for path in self.query_files()?.iter().chain(extra) {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let q = parse_query(&text, engine.dictionary_mut())
                .with_context(|| format!("parsing {}", path.display()))?;
            let receipt = engine
                .register_query(q)
                .with_context(|| format!("registering {}", path.display()))?;
            let nq = parse_query(&text, naive.dictionary_mut())?;
            naive.register(nq);
            receipts.push(receipt);
            queries.push((path.clone(), text));
        }
        Ok(Session {
            engine,
            naive,
            queries,
            receipts,
        })
    }
}
