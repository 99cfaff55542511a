//! End-to-end analysis: parse, slice, derive facts, check properties with
//! hybrid refinement, and assemble reports.

mod bench;
mod corpus;
mod report;

pub use bench::{benchmark_modes, generate_bench_program, BenchRow, BenchTable};
pub use corpus::{load_manifest, run_corpus, CorpusRow, CorpusSummary, Manifest, ManifestEntry};
pub use report::{render_text, report_json, PropertyResult, Report, Stats};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::callgraph::{build_callgraph, parse_endpoint_query, slice_functions, Callgraph};
use crate::datalog::{DatalogError, EvalOptions};
use crate::hybrid::{
    apply_conservative, find_conservative_predicates, refine_and_recheck, DeltaConfig, HybridError,
    RefineStep,
};
use crate::osl::{build_cfg, lower_to_ir, parse_files, Cfg, IrProgram, OslError};
use crate::property::{check_property, Outcome, Property, Verdict};
use crate::sdg::{analyze_scope, hex_digest, ScopeFacts, SdgError, TagConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default per-property time limit.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error(transparent)]
    Parse(#[from] OslError),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisMode {
    /// Facts only over functions on call paths matching the endpoint query.
    Demand,
    /// Facts over the whole program.
    Eager,
}

impl std::str::FromStr for AnalysisMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "demand" => Ok(AnalysisMode::Demand),
            "eager" => Ok(AnalysisMode::Eager),
            _ => Err(format!("unknown mode `{s}` (expected demand or eager)")),
        }
    }
}

impl std::fmt::Display for AnalysisMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AnalysisMode::Demand => "demand",
            AnalysisMode::Eager => "eager",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Analyzer {
    pub tags: TagConfig,
    pub delta: DeltaConfig,
    pub properties: Vec<Property>,
    pub mode: AnalysisMode,
    /// Overrides every property's endpoint query.
    pub endpoint_query: Option<String>,
    pub timeout: Duration,
    pub all_witnesses: bool,
}

/// A parsed and lowered program.
#[derive(Debug, Clone)]
pub struct Program {
    pub name: String,
    pub ir: IrProgram,
    pub cfg: Cfg,
    pub cg: Callgraph,
    pub parse_time: Duration,
}

#[derive(Debug, Clone)]
pub struct PropertyRun {
    pub verdict: Verdict,
    pub scope: BTreeSet<String>,
    pub refine: Vec<RefineStep>,
    pub stats: Stats,
}

impl Analyzer {
    pub fn new(properties: Vec<Property>) -> Analyzer {
        Analyzer {
            tags: TagConfig::default_config(),
            delta: DeltaConfig::default_config(),
            properties,
            mode: AnalysisMode::Demand,
            endpoint_query: None,
            timeout: DEFAULT_TIMEOUT,
            all_witnesses: false,
        }
    }

    pub fn config_digest(&self) -> String {
        let mut parts = vec![self.tags.digest.clone(), self.delta.digest.clone()];
        parts.extend(self.properties.iter().map(|p| p.source.clone()));
        if let Some(q) = &self.endpoint_query {
            parts.push(q.clone());
        }
        hex_digest(parts.join("\0").as_bytes())
    }

    pub fn load(&self, name: &str, files: &[(String, String)]) -> Result<Program, AnalysisError> {
        let t = Instant::now();
        let src = parse_files(files, &self.tags.builtins)?;
        let ir = lower_to_ir(&src);
        let cfg = build_cfg(&ir);
        let cg = build_callgraph(&ir);
        Ok(Program {
            name: name.to_string(),
            ir,
            cfg,
            cg,
            parse_time: t.elapsed(),
        })
    }

    pub fn load_paths(&self, paths: &[impl AsRef<Path>]) -> Result<Program, AnalysisError> {
        let mut files = Vec::new();
        for p in paths {
            let p = p.as_ref();
            let text = std::fs::read_to_string(p).map_err(|e| AnalysisError::Io {
                path: p.display().to_string(),
                msg: e.to_string(),
            })?;
            files.push((p.display().to_string(), text));
        }
        let name = paths
            .iter()
            .map(|p| p.as_ref().display().to_string())
            .collect::<Vec<_>>()
            .join(",");
        self.load(&name, &files)
    }

    fn query_for<'a>(&'a self, p: &'a Property) -> Option<&'a str> {
        self.endpoint_query
            .as_deref()
            .or(p.endpoint_query.as_deref())
    }

    /// Functions the property's endpoint query selects, or `None` when no
    /// query applies.
    pub fn endpoint_scope(
        &self,
        prog: &Program,
        p: &Property,
    ) -> Result<Option<BTreeSet<String>>, String> {
        let Some(q) = self.query_for(p) else {
            return Ok(None);
        };
        let q = parse_endpoint_query(q).map_err(|e| e.to_string())?;
        Ok(Some(slice_functions(&prog.cg, &q)))
    }

    /// Verdicts for every property, in property order.
    pub fn run_all(&self, prog: &Program) -> Vec<PropertyRun> {
        let mut cache: BTreeMap<BTreeSet<String>, Result<(ScopeFacts, Duration), String>> =
            BTreeMap::new();
        self.properties
            .iter()
            .map(|p| self.run_property(prog, p, &mut cache))
            .collect()
    }

    fn run_property(
        &self,
        prog: &Program,
        p: &Property,
        cache: &mut BTreeMap<BTreeSet<String>, Result<(ScopeFacts, Duration), String>>,
    ) -> PropertyRun {
        let started = Instant::now();
        let deadline = started + self.timeout;
        let opts = EvalOptions {
            deadline: Some(deadline),
            ..Default::default()
        };
        let mut stats = Stats::default();
        let fail = |msg: String, stats: Stats| PropertyRun {
            verdict: Verdict::error(&p.id, msg),
            scope: BTreeSet::new(),
            refine: vec![],
            stats,
        };
        let t = Instant::now();
        let endpoint = match self.endpoint_scope(prog, p) {
            Ok(s) => s,
            Err(e) => return fail(format!("endpoint query: {e}"), stats),
        };
        stats.slice_ms = ms(t.elapsed());
        let scope = match (self.mode, endpoint) {
            (_, Some(s)) if s.is_empty() => {
                stats.total_ms = ms(started.elapsed());
                return PropertyRun {
                    verdict: Verdict::not_applicable(p),
                    scope: s,
                    refine: vec![],
                    stats,
                };
            }
            (AnalysisMode::Demand, Some(s)) => s,
            (AnalysisMode::Demand, None) => {
                return fail("demand mode requires an endpoint query".into(), stats)
            }
            (AnalysisMode::Eager, _) => prog.ir.function_names(),
        };
        stats.scope_functions = scope.len();

        let entry = cache.entry(scope.clone()).or_insert_with(|| {
            let t = Instant::now();
            analyze_scope(&prog.ir, &prog.cfg, &prog.cg, &scope, &self.tags, opts)
                .map(|f| (f, t.elapsed()))
                .map_err(|e| match e {
                    SdgError::Datalog(DatalogError::Timeout) => "timeout exceeded".to_string(),
                    e => e.to_string(),
                })
        });
        let (facts, facts_time) = match entry {
            Ok(f) => (&f.0, f.1),
            Err(e) => return fail(e.clone(), stats),
        };
        stats.facts_ms = ms(facts_time);
        stats.sdg_nodes = facts.sdg.nodes.len();
        stats.sdg_edges = facts.sdg.edge_count();
        stats.base_facts = facts.stats.base_facts;
        stats.derived_facts = facts.stats.derived_facts;

        let t = Instant::now();
        let result = (|| -> Result<(Verdict, Vec<RefineStep>, usize), HybridError> {
            let mut db = facts.db.clone();
            let preds = find_conservative_predicates(&prog.ir, &db, &scope, &self.tags);
            let removed = apply_conservative(&mut db, &preds);
            let initial = check_property(&db, p, opts, self.all_witnesses)?;
            let (v, log) =
                refine_and_recheck(&mut db, &preds, &removed, initial, &self.delta, |db| {
                    check_property(db, p, opts, self.all_witnesses)
                })?;
            Ok((v, log, preds.len()))
        })();
        stats.check_ms = ms(t.elapsed());
        stats.total_ms = ms(started.elapsed());
        match result {
            Ok((verdict, refine, n)) => {
                stats.conservative_predicates = n;
                PropertyRun {
                    verdict,
                    scope,
                    refine,
                    stats,
                }
            }
            Err(HybridError::Datalog(DatalogError::Timeout)) => {
                fail("timeout exceeded".into(), stats)
            }
            Err(e) => fail(e.to_string(), stats),
        }
    }

    pub fn analyze(&self, prog: &Program) -> Report {
        let runs = self.run_all(prog);
        Report {
            program: prog.name.clone(),
            mode: self.mode,
            results: runs.into_iter().map(PropertyResult::from).collect(),
            version: VERSION.to_string(),
            config_digest: self.config_digest(),
            timestamp: None,
        }
    }
}

fn ms(d: Duration) -> f64 {
    (d.as_secs_f64() * 1e6).round() / 1e3
}

/// Exit status for a set of verdicts: 2 on any error, 1 on any violation.
pub fn exit_code<'a>(outcomes: impl IntoIterator<Item = &'a Outcome>) -> i32 {
    let mut code = 0;
    for o in outcomes {
        match o {
            Outcome::Error => return 2,
            Outcome::Violation => code = 1,
            _ => {}
        }
    }
    code
}
