use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnalysisError, Analyzer};
use crate::property::Outcome;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub file: String,
    #[serde(default)]
    pub description: String,
    /// Property id -> expected outcome.
    pub expect: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub sample: Vec<ManifestEntry>,
}

pub fn load_manifest(path: &Path) -> Result<Manifest, AnalysisError> {
    let text = std::fs::read_to_string(path).map_err(|e| AnalysisError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    toml::from_str(&text)
        .map_err(|e| AnalysisError::Config(format!("{}: {}", path.display(), e.message())))
}

fn parse_outcome(s: &str) -> Option<Outcome> {
    match s {
        "satisfied" => Some(Outcome::Satisfied),
        "violation" => Some(Outcome::Violation),
        "not-applicable" => Some(Outcome::NotApplicable),
        "error" => Some(Outcome::Error),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusRow {
    pub file: String,
    pub property: String,
    pub expected: Outcome,
    pub actual: Outcome,
}

impl CorpusRow {
    pub fn matches(&self) -> bool {
        self.expected == self.actual
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct CorpusSummary {
    pub rows: Vec<CorpusRow>,
}

impl CorpusSummary {
    pub fn mismatches(&self) -> Vec<&CorpusRow> {
        self.rows.iter().filter(|r| !r.matches()).collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            writeln!(
                s,
                "{:<28} {:<5} expected {:<15} actual {:<15} {}",
                r.file,
                r.property,
                r.expected.to_string(),
                r.actual.to_string(),
                if r.matches() { "ok" } else { "MISMATCH" }
            )
            .unwrap();
        }
        writeln!(
            s,
            "{} verdicts, {} mismatches",
            self.rows.len(),
            self.mismatches().len()
        )
        .unwrap();
        s
    }
}

/// Analyze every `.osl` file directly in `dir` and compare with the
/// manifest. Every file needs an entry and every entry a file.
pub fn run_corpus(
    analyzer: &Analyzer,
    dir: &Path,
    manifest: &Manifest,
) -> Result<CorpusSummary, AnalysisError> {
    let io = |e: std::io::Error| AnalysisError::Io {
        path: dir.display().to_string(),
        msg: e.to_string(),
    };
    let mut files = BTreeSet::new();
    for e in std::fs::read_dir(dir).map_err(io)? {
        let p = e.map_err(io)?.path();
        if p.is_file() && p.extension().is_some_and(|x| x == "osl") {
            files.insert(p.file_name().unwrap().to_string_lossy().to_string());
        }
    }
    let listed: BTreeSet<String> = manifest.sample.iter().map(|s| s.file.clone()).collect();
    if let Some(f) = files.difference(&listed).next() {
        return Err(AnalysisError::Config(format!("{f} has no manifest entry")));
    }
    if let Some(f) = listed.difference(&files).next() {
        return Err(AnalysisError::Config(format!(
            "manifest lists missing file {f}"
        )));
    }
    let known: BTreeSet<&str> = analyzer.properties.iter().map(|p| p.id.as_str()).collect();
    let mut summary = CorpusSummary::default();
    for entry in &manifest.sample {
        let mut expected = BTreeMap::new();
        for (prop, outcome) in &entry.expect {
            if !known.contains(prop.as_str()) {
                return Err(AnalysisError::Config(format!(
                    "{}: unknown property {prop}",
                    entry.file
                )));
            }
            let o = parse_outcome(outcome).ok_or_else(|| {
                AnalysisError::Config(format!("{}: unknown outcome `{outcome}`", entry.file))
            })?;
            expected.insert(prop.clone(), o);
        }
        let runs = match analyzer.load_paths(&[dir.join(&entry.file)]) {
            Ok(prog) => analyzer.run_all(&prog),
            Err(e) => {
                return Err(AnalysisError::Config(format!("{}: {e}", entry.file)));
            }
        };
        for r in runs {
            if let Some(exp) = expected.get(&r.verdict.property) {
                summary.rows.push(CorpusRow {
                    file: entry.file.clone(),
                    property: r.verdict.property.clone(),
                    expected: exp.clone(),
                    actual: r.verdict.outcome,
                });
            }
        }
    }
    Ok(summary)
}
