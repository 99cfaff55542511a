//! Property signatures: loading property files, compiling signature graphs
//! to Datalog, brute-force embedding, and verdicts.

mod embed;
mod signature;

pub use embed::{
    check_embedding_bruteforce, is_embedding, Embedding, TypedGraph, MAX_SIGNATURE_NODES,
};
pub use signature::{
    compile_signature, decompile_rule, label_vars, EdgeKind, NodeType, SigEdge, SigNode,
    SignatureGraph, NODE_KINDS,
};

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::datalog::{
    evaluate_with, natural_cmp, parse_program, query, DatalogError, EvalOptions, FactDb, Program,
    Rule,
};
use crate::sdg::is_known_tag;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropertyError {
    #[error("{file}: missing header field `{field}`")]
    MissingHeader { file: String, field: String },
    #[error("{file}: bad header field `{field}`: {msg}")]
    BadHeader {
        file: String,
        field: String,
        msg: String,
    },
    #[error("{file}: no rule derives `{id}`")]
    NoGoal { file: String, id: String },
    #[error("{file}: unknown tag `{tag}`")]
    UnknownTag { file: String, tag: String },
    #[error("{file}: {source}")]
    Datalog {
        file: String,
        #[source]
        source: DatalogError,
    },
    #[error("signature has {0} nodes; the enumerator accepts at most 10")]
    SignatureTooLarge(usize),
    #[error("cannot read {0}: {1}")]
    Io(String, String),
    #[error("duplicate property id `{0}`")]
    Duplicate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// The goal describes the compliant shape; it must be derivable.
    Presence,
    /// The goal describes a forbidden shape; it must not be derivable.
    Absence,
}

/// One property file: header plus rules. The goal predicate is named after
/// the id; other rules are helpers.
#[derive(Debug, Clone)]
pub struct Property {
    pub id: String,
    pub grants: Vec<String>,
    pub endpoint_query: Option<String>,
    pub mode: Mode,
    pub program: Program,
    pub source: String,
}

impl Property {
    pub fn parse(name: &str, text: &str) -> Result<Property, PropertyError> {
        let mut id = None;
        let mut grants = Vec::new();
        let mut endpoint_query = None;
        let mut mode = None;
        let bad = |field: &str, msg: String| PropertyError::BadHeader {
            file: name.to_string(),
            field: field.to_string(),
            msg,
        };
        for line in text.lines() {
            let Some(rest) = line
                .trim_start()
                .strip_prefix('%')
                .or_else(|| line.trim_start().strip_prefix("//"))
            else {
                continue;
            };
            let Some((key, value)) = rest.split_once(':') else {
                continue;
            };
            let value = value.trim();
            match key.trim() {
                "id" => id = Some(value.to_string()),
                "grants" => {
                    grants = value
                        .split(',')
                        .map(|g| g.trim().to_string())
                        .filter(|g| !g.is_empty())
                        .collect()
                }
                "endpoint-query" => endpoint_query = Some(value.to_string()),
                "mode" => {
                    mode = Some(match value {
                        "presence" => Mode::Presence,
                        "absence" => Mode::Absence,
                        other => return Err(bad("mode", format!("`{other}`"))),
                    })
                }
                _ => {}
            }
        }
        let id = id.ok_or_else(|| PropertyError::MissingHeader {
            file: name.to_string(),
            field: "id".into(),
        })?;
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(bad("id", format!("`{id}` is not an identifier")));
        }
        if let Some(q) = &endpoint_query {
            crate::callgraph::parse_endpoint_query(q)
                .map_err(|e| bad("endpoint-query", e.to_string()))?;
        }
        let program = parse_program(text).map_err(|source| PropertyError::Datalog {
            file: name.to_string(),
            source,
        })?;
        if !program.rules.iter().any(|r| r.head.pred == id) {
            return Err(PropertyError::NoGoal {
                file: name.to_string(),
                id,
            });
        }
        for r in &program.rules {
            for a in r.body.iter().filter_map(|l| l.atom()) {
                if a.pred != "OAuthTag" {
                    continue;
                }
                if let Some(crate::datalog::Term::Const(t)) = a.args.get(1) {
                    if !is_known_tag(t) {
                        return Err(PropertyError::UnknownTag {
                            file: name.to_string(),
                            tag: t.clone(),
                        });
                    }
                }
            }
        }
        crate::datalog::stratify(&program.rules).map_err(|source| PropertyError::Datalog {
            file: name.to_string(),
            source,
        })?;
        Ok(Property {
            id,
            grants,
            endpoint_query,
            mode: mode.unwrap_or(Mode::Presence),
            program,
            source: text.to_string(),
        })
    }

    pub fn goal_rules(&self) -> impl Iterator<Item = &Rule> {
        self.program.rules.iter().filter(|r| r.head.pred == self.id)
    }

    pub fn helper_rules(&self) -> Vec<Rule> {
        self.program
            .rules
            .iter()
            .filter(|r| r.head.pred != self.id)
            .cloned()
            .collect()
    }

    /// One signature graph per goal rule, when every goal rule is
    /// expressible as a signature.
    pub fn signatures(&self) -> Option<Vec<SignatureGraph>> {
        let helpers = self.helper_rules();
        self.goal_rules()
            .map(|r| decompile_rule(r, &helpers))
            .collect()
    }
}

const BUNDLED: &[(&str, &str)] = &[
    ("P1.dl", include_str!("../../../../properties/P1.dl")),
    ("P2.dl", include_str!("../../../../properties/P2.dl")),
    ("P3.dl", include_str!("../../../../properties/P3.dl")),
    ("P4.dl", include_str!("../../../../properties/P4.dl")),
    ("P5.dl", include_str!("../../../../properties/P5.dl")),
    ("P6.dl", include_str!("../../../../properties/P6.dl")),
    ("P7.dl", include_str!("../../../../properties/P7.dl")),
    ("P8.dl", include_str!("../../../../properties/P8.dl")),
    ("P9.dl", include_str!("../../../../properties/P9.dl")),
    ("P10.dl", include_str!("../../../../properties/P10.dl")),
];

/// The ten shipped properties, in id order.
pub fn bundled_properties() -> Vec<Property> {
    BUNDLED
        .iter()
        .map(|(name, text)| Property::parse(name, text).expect("bundled property is valid"))
        .collect()
}

/// All `*.dl` files in a directory, sorted by id.
pub fn load_properties_dir(dir: &Path) -> Result<Vec<Property>, PropertyError> {
    let io = |e: std::io::Error| PropertyError::Io(dir.display().to_string(), e.to_string());
    let mut out: Vec<Property> = Vec::new();
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "dl"))
        .collect();
    paths.sort();
    for p in paths {
        let text = std::fs::read_to_string(&p).map_err(io)?;
        let prop = Property::parse(&p.display().to_string(), &text)?;
        if out.iter().any(|q| q.id == prop.id) {
            return Err(PropertyError::Duplicate(prop.id));
        }
        out.push(prop);
    }
    sort_by_id(&mut out);
    Ok(out)
}

pub fn sort_by_id(props: &mut [Property]) {
    props.sort_by(|a, b| natural_cmp(&a.id, &b.id));
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Satisfied,
    Violation,
    NotApplicable,
    Error,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Satisfied => "satisfied",
            Outcome::Violation => "violation",
            Outcome::NotApplicable => "not-applicable",
            Outcome::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub property: String,
    pub outcome: Outcome,
    /// Statement labels of the least binding, statement variables in
    /// natural order.
    pub witness: Vec<String>,
    pub witness_vars: Vec<String>,
    /// Every binding, when requested.
    pub all_witnesses: Vec<Vec<String>>,
    pub diagnostics: Vec<String>,
}

impl Verdict {
    pub fn not_applicable(p: &Property) -> Verdict {
        Verdict {
            property: p.id.clone(),
            outcome: Outcome::NotApplicable,
            witness: vec![],
            witness_vars: vec![],
            all_witnesses: vec![],
            diagnostics: vec!["endpoint query selects no functions".into()],
        }
    }

    pub fn error(id: &str, msg: String) -> Verdict {
        Verdict {
            property: id.to_string(),
            outcome: Outcome::Error,
            witness: vec![],
            witness_vars: vec![],
            all_witnesses: vec![],
            diagnostics: vec![msg],
        }
    }
}

/// Statement variables of the first satisfied goal rule, all rows, and
/// query warnings.
pub type GoalBindings = (Vec<String>, Vec<Vec<String>>, Vec<String>);

/// Bindings of the goal, as (statement variables, rows). Rules are tried in
/// file order; rows are sorted.
pub fn goal_bindings(
    db: &FactDb,
    p: &Property,
    opts: EvalOptions,
) -> Result<GoalBindings, DatalogError> {
    let helpers = p.helper_rules();
    let owned;
    let db = if helpers.is_empty() {
        db
    } else {
        owned = evaluate_with(db.clone(), &helpers, opts)?.0;
        &owned
    };
    let mut warnings = Vec::new();
    let mut first: Option<(Vec<String>, Vec<Vec<String>>)> = None;
    let mut all = Vec::new();
    for rule in p.goal_rules() {
        let r = query(db, &rule.body)?;
        warnings.extend(r.warnings);
        let mut vars: Vec<String> = label_vars(&rule.body).into_iter().collect();
        vars.sort_by(|a, b| natural_cmp(a, b));
        let mut rows: Vec<Vec<String>> = r
            .bindings
            .iter()
            .map(|b| vars.iter().map(|v| b[v].clone()).collect())
            .collect();
        rows.sort_by(|a, b| cmp_rows(a, b));
        rows.dedup();
        all.extend(rows.iter().cloned());
        if first.is_none() && !rows.is_empty() {
            first = Some((vars, rows));
        }
    }
    warnings.sort();
    warnings.dedup();
    match first {
        Some((vars, _)) => Ok((vars, all, warnings)),
        None => Ok((vec![], vec![], warnings)),
    }
}

fn cmp_rows(a: &[String], b: &[String]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| natural_cmp(x, y))
        .find(|o| o.is_ne())
        .unwrap_or(a.len().cmp(&b.len()))
}

/// Verdict for a property whose endpoint is present, over facts derived
/// for its scope.
pub fn check_property(
    db: &FactDb,
    p: &Property,
    opts: EvalOptions,
    all_witnesses: bool,
) -> Result<Verdict, DatalogError> {
    let (vars, rows, diagnostics) = goal_bindings(db, p, opts)?;
    let found = !rows.is_empty();
    let outcome = match (p.mode, found) {
        (Mode::Presence, true) | (Mode::Absence, false) => Outcome::Satisfied,
        _ => Outcome::Violation,
    };
    let witness = rows.first().cloned().unwrap_or_default();
    Ok(Verdict {
        property: p.id.clone(),
        outcome,
        witness,
        witness_vars: vars,
        all_witnesses: if all_witnesses { rows } else { vec![] },
        diagnostics,
    })
}

/// Whether any of the signatures embeds, by brute force.
pub fn embeds_bruteforce(sigs: &[SignatureGraph], g: &TypedGraph) -> Result<bool, PropertyError> {
    for s in sigs {
        if !check_embedding_bruteforce(s, g)?.is_empty() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Tags a signature set refers to.
pub fn signature_tags(sigs: &[SignatureGraph]) -> BTreeSet<String> {
    fn walk(g: &SignatureGraph, out: &mut BTreeSet<String>) {
        for n in &g.nodes {
            for t in &n.types {
                if let NodeType::Tag(t) = t {
                    out.insert(t.clone());
                }
            }
        }
        for f in &g.forbidden {
            walk(f, out);
        }
    }
    let mut out = BTreeSet::new();
    for s in sigs {
        walk(s, &mut out);
    }
    out
}
