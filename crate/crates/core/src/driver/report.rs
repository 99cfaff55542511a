use std::fmt::Write;

use serde::Serialize;

use super::{AnalysisMode, PropertyRun};
use crate::hybrid::RefineStep;
use crate::property::Outcome;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Stats {
    pub scope_functions: usize,
    pub sdg_nodes: usize,
    pub sdg_edges: usize,
    pub base_facts: usize,
    pub derived_facts: usize,
    pub conservative_predicates: usize,
    pub slice_ms: f64,
    pub facts_ms: f64,
    pub check_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PropertyResult {
    pub property: String,
    pub outcome: Outcome,
    pub witness: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub witness_vars: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub all_witnesses: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub refinement: Vec<RefineStep>,
    pub stats: Stats,
}

impl From<PropertyRun> for PropertyResult {
    fn from(r: PropertyRun) -> Self {
        PropertyResult {
            property: r.verdict.property,
            outcome: r.verdict.outcome,
            witness: r.verdict.witness,
            witness_vars: r.verdict.witness_vars,
            all_witnesses: r.verdict.all_witnesses,
            diagnostics: r.verdict.diagnostics,
            refinement: r.refine,
            stats: r.stats,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub program: String,
    pub mode: AnalysisMode,
    pub results: Vec<PropertyResult>,
    pub version: String,
    pub config_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

/// JSON rendering. Without timestamps, timing statistics are zeroed so
/// repeated runs are byte-identical.
pub fn report_json(reports: &[Report], timestamps: bool) -> String {
    let mut reports = reports.to_vec();
    if !timestamps {
        for r in &mut reports {
            r.timestamp = None;
            for res in &mut r.results {
                res.stats.slice_ms = 0.0;
                res.stats.facts_ms = 0.0;
                res.stats.check_ms = 0.0;
                res.stats.total_ms = 0.0;
            }
        }
    }
    let mut out = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])
    } else {
        serde_json::to_string_pretty(&reports)
    }
    .expect("report serializes");
    out.push('\n');
    out
}

pub fn render_text(reports: &[Report]) -> String {
    let mut s = String::new();
    for r in reports {
        writeln!(s, "{} ({} mode)", r.program, r.mode).unwrap();
        for res in &r.results {
            write!(s, "  {:<5} {:<15}", res.property, res.outcome.to_string()).unwrap();
            if !res.witness.is_empty() {
                write!(s, " witness [{}]", res.witness.join(", ")).unwrap();
            }
            if res.outcome == Outcome::Error || res.outcome == Outcome::NotApplicable {
                if let Some(d) = res.diagnostics.first() {
                    write!(s, " {d}").unwrap();
                }
            }
            writeln!(s).unwrap();
            for step in &res.refinement {
                writeln!(
                    s,
                    "        branch {} / call {}: {} {}",
                    step.branch,
                    step.call,
                    step.check.as_deref().unwrap_or("-"),
                    if step.flipped {
                        "upgraded".to_string()
                    } else if let Some(n) = &step.note {
                        n.clone()
                    } else {
                        format!("differs on {:?}", step.differing)
                    }
                )
                .unwrap();
            }
        }
    }
    s
}
