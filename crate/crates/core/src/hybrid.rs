//! Regex-dependent branch predicates: assumed false, then upgraded when the
//! program's pattern agrees with a reference pattern on a sample set.

use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datalog::{DatalogError, FactDb};
use crate::osl::{InstrKind, IrProgram, Label, Lit, Op, Operand};
use crate::property::{Outcome, Verdict};
use crate::sdg::{hex_digest, is_known_tag, scope_instructions, TagConfig};

pub const DEFAULT_DELTA_SAMPLES: &str = include_str!("../../../config/delta-samples");

/// Argument position of the pattern in a regex matcher call.
pub const PATTERN_ARG: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HybridError {
    #[error("delta samples: {0}")]
    Config(String),
    #[error("check `{0}` has no samples")]
    EmptySamples(String),
    #[error("pattern `{pattern}` does not compile: {msg}")]
    BadPattern { pattern: String, msg: String },
    #[error(transparent)]
    Datalog(#[from] DatalogError),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaCheck {
    /// Structural tag granted to the matcher call once upgraded.
    pub tag: String,
    pub reference: String,
    pub samples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaConfig {
    pub checks: BTreeMap<String, DeltaCheck>,
    pub digest: String,
}

impl DeltaConfig {
    pub fn parse(text: &str) -> Result<DeltaConfig, HybridError> {
        let checks: BTreeMap<String, DeltaCheck> =
            toml::from_str(text).map_err(|e| HybridError::Config(e.message().to_string()))?;
        for (id, c) in &checks {
            if c.samples.is_empty() {
                return Err(HybridError::EmptySamples(id.clone()));
            }
            full_match(&c.reference)?;
            if !is_known_tag(&c.tag) {
                return Err(HybridError::Config(format!(
                    "check `{id}`: unknown tag `{}`",
                    c.tag
                )));
            }
        }
        Ok(DeltaConfig {
            checks,
            digest: hex_digest(text.as_bytes()),
        })
    }

    pub fn default_config() -> DeltaConfig {
        DeltaConfig::parse(DEFAULT_DELTA_SAMPLES).expect("bundled delta samples are valid")
    }
}

fn full_match(pattern: &str) -> Result<Regex, HybridError> {
    Regex::new(&format!("^(?:{pattern})$")).map_err(|e| HybridError::BadPattern {
        pattern: pattern.to_string(),
        msg: e.to_string(),
    })
}

/// Samples on which `actual` and `reference` disagree (anchored full match).
pub fn delta_test(
    actual: &str,
    reference: &str,
    samples: &[String],
) -> Result<Vec<String>, HybridError> {
    if samples.is_empty() {
        return Err(HybridError::EmptySamples(reference.to_string()));
    }
    let a = full_match(actual)?;
    let r = full_match(reference)?;
    Ok(samples
        .iter()
        .filter(|s| a.is_match(s) != r.is_match(s))
        .cloned()
        .collect())
}

/// Outcome of comparing a pattern with every configured reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeltaResult {
    pub check: String,
    pub differing: Vec<String>,
}

/// The check whose reference the pattern is closest to (fewest differing
/// samples; ties go to the first id).
pub fn classify(pattern: &str, config: &DeltaConfig) -> Result<Option<DeltaResult>, HybridError> {
    let mut best: Option<DeltaResult> = None;
    for (id, c) in &config.checks {
        let differing = delta_test(pattern, &c.reference, &c.samples)?;
        if best
            .as_ref()
            .is_none_or(|b| differing.len() < b.differing.len())
        {
            best = Some(DeltaResult {
                check: id.clone(),
                differing,
            });
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConservativePredicate {
    pub branch: Label,
    /// The matcher call the condition depends on.
    pub call: Label,
    /// Constant-folded pattern; `None` when the pattern is not constant.
    pub pattern: Option<String>,
}

/// Fold an operand to a string constant through single definitions within
/// its function (copies, constants and `+` concatenation).
pub fn fold_constant(ir: &IrProgram, function: &str, op: &Operand) -> Option<String> {
    fold(ir, function, op, 0)
}

fn fold(ir: &IrProgram, function: &str, op: &Operand, depth: usize) -> Option<String> {
    if depth > 64 {
        return None;
    }
    let v = match op {
        Operand::Const(Lit::Str(s)) | Operand::Const(Lit::Num(s)) => return Some(s.clone()),
        Operand::Const(_) => return None,
        Operand::Var(v) => v,
    };
    let f = ir.function(function)?;
    let mut defs = f
        .labels
        .iter()
        .map(|&l| ir.instr(l))
        .filter(|i| i.def() == Some(v.as_str()));
    let def = defs.next()?;
    if defs.next().is_some() {
        return None;
    }
    match &def.kind {
        InstrKind::Const { value, .. } => {
            fold(ir, function, &Operand::Const(value.clone()), depth + 1)
        }
        InstrKind::Assign {
            op: Op::Copy, args, ..
        } => fold(ir, function, &args[0], depth + 1),
        InstrKind::Assign {
            op: Op::Add, args, ..
        } => {
            let mut s = String::new();
            for a in args {
                s.push_str(&fold(ir, function, a, depth + 1)?);
            }
            Some(s)
        }
        _ => None,
    }
}

/// Branches whose condition depends on a regex matcher call in scope.
pub fn find_conservative_predicates(
    ir: &IrProgram,
    db: &FactDb,
    scope: &BTreeSet<String>,
    config: &TagConfig,
) -> Vec<ConservativePredicate> {
    let mut out = Vec::new();
    let branches: Vec<(Label, &str)> = scope_instructions(ir, scope)
        .filter_map(|i| match &i.kind {
            InstrKind::Branch { cond, .. } => Some((i.label, cond.as_str())),
            _ => None,
        })
        .collect();
    for ins in scope_instructions(ir, scope) {
        let InstrKind::Call { callee, args, .. } = &ins.kind else {
            continue;
        };
        if !config.regex_matchers.contains(callee.name()) {
            continue;
        }
        let pattern = args
            .get(PATTERN_ARG)
            .and_then(|a| fold_constant(ir, &ins.function, a));
        let call = ins.label.to_string();
        for &(b, cond) in &branches {
            if db.contains("flowTo", &[call.as_str(), cond]) {
                out.push(ConservativePredicate {
                    branch: b,
                    call: ins.label,
                    pattern: pattern.clone(),
                });
            }
        }
    }
    out.sort_by_key(|p| (p.branch, p.call));
    out
}

/// Remove the branch facts of every pending predicate.
pub fn apply_conservative(db: &mut FactDb, preds: &[ConservativePredicate]) -> Vec<Vec<String>> {
    let branches: BTreeSet<String> = preds.iter().map(|p| p.branch.to_string()).collect();
    let removed: Vec<Vec<String>> = db
        .sorted_tuples("branch")
        .into_iter()
        .filter(|t| branches.contains(&t[0]))
        .collect();
    for t in &removed {
        db.remove("branch", t);
    }
    removed
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RefineStep {
    pub branch: Label,
    pub call: Label,
    pub pattern: Option<String>,
    pub check: Option<String>,
    pub differing: Vec<String>,
    pub flipped: bool,
    /// Verdict after re-checking, when the predicate flipped.
    pub outcome: Option<Outcome>,
    pub note: Option<String>,
}

/// Delta-test pending predicates one at a time, restoring a branch once all
/// its predicates are upgraded and re-checking after each flip, until the
/// verdict is satisfied or no predicate is left.
pub fn refine_and_recheck<F>(
    db: &mut FactDb,
    preds: &[ConservativePredicate],
    removed_branches: &[Vec<String>],
    initial: Verdict,
    delta: &DeltaConfig,
    mut check: F,
) -> Result<(Verdict, Vec<RefineStep>), HybridError>
where
    F: FnMut(&FactDb) -> Result<Verdict, DatalogError>,
{
    let mut verdict = initial;
    let mut log = Vec::new();
    let mut pending: BTreeSet<(Label, Label)> = preds.iter().map(|p| (p.branch, p.call)).collect();
    for p in preds {
        if verdict.outcome != Outcome::Violation {
            break;
        }
        let mut step = RefineStep {
            branch: p.branch,
            call: p.call,
            pattern: p.pattern.clone(),
            check: None,
            differing: vec![],
            flipped: false,
            outcome: None,
            note: None,
        };
        let Some(pattern) = &p.pattern else {
            step.note = Some("pattern is not a constant".into());
            log.push(step);
            continue;
        };
        match classify(pattern, delta) {
            Err(e) => step.note = Some(e.to_string()),
            Ok(None) => step.note = Some("no reference checks configured".into()),
            Ok(Some(r)) => {
                step.check = Some(r.check.clone());
                step.flipped = r.differing.is_empty();
                step.differing = r.differing;
                if step.flipped {
                    pending.remove(&(p.branch, p.call));
                    let tag = &delta.checks[&r.check].tag;
                    db.insert("OAuthTag", &[p.call.to_string(), tag.clone()])?;
                    if !pending.iter().any(|(b, _)| *b == p.branch) {
                        let b = p.branch.to_string();
                        for t in removed_branches.iter().filter(|t| t[0] == b) {
                            db.insert("branch", t)?;
                        }
                    }
                    verdict = check(db)?;
                    step.outcome = Some(verdict.outcome.clone());
                }
            }
        }
        log.push(step);
    }
    Ok((verdict, log))
}
