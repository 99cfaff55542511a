//! System dependence graph construction, points-to, dependence facts
//! (`flowTo`, `followBy`) and OAuth tag computation.

mod facts;
mod graph;
mod pointsto;
mod tags;

pub use facts::{
    access_path, base_fact_db, compute_oauth_tags, dependence_rules, derive_dependence_facts,
    scope_instructions, seed_tags, tag_rules, tags_by_label, value_tags_at, DEPENDENCE_RULES,
    TAG_RULES,
};
pub use graph::{build_sdg, ControlEdge, ControlKind, DataEdge, Sdg};
pub use pointsto::{compute_points_to, ret_var, PointsTo};
pub use tags::{
    hex_digest, is_known_tag, is_value_tag, FieldKey, TagConfig, DEFAULT_TAG_CONFIG,
    STRUCTURAL_TAGS, VALUE_TAGS,
};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::callgraph::Callgraph;
use crate::datalog::{DatalogError, EvalOptions, FactDb};
use crate::osl::{Cfg, IrProgram};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SdgError {
    #[error("tag configuration: {0}")]
    Config(String),
    #[error("unknown tag `{0}`")]
    UnknownTag(String),
    #[error("scope names unknown function `{0}`")]
    UnknownFunction(String),
    #[error(transparent)]
    Datalog(#[from] DatalogError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FactStats {
    pub base_facts: usize,
    pub derived_facts: usize,
    pub flow_to: usize,
    pub follow_by: usize,
    pub tags: usize,
}

/// Everything derived for one analysis scope.
#[derive(Debug, Clone)]
pub struct ScopeFacts {
    pub sdg: Sdg,
    pub pts: PointsTo,
    pub db: FactDb,
    pub stats: FactStats,
}

pub fn analyze_scope(
    ir: &IrProgram,
    cfg: &Cfg,
    cg: &Callgraph,
    scope: &BTreeSet<String>,
    config: &TagConfig,
    opts: EvalOptions,
) -> Result<ScopeFacts, SdgError> {
    let pts = compute_points_to(ir, scope);
    let mut sdg = build_sdg(ir, cg, &pts, scope)?;
    let db = base_fact_db(ir, cfg, &pts, scope);
    let base_facts = db.total_len();
    let (db, dep) = derive_dependence_facts(db, opts)?;
    let seeds = seed_tags(ir, scope, config);
    let (db, tag) = compute_oauth_tags(db, &seeds, opts)?;
    let tags = tags_by_label(&db);
    for e in &mut sdg.data {
        e.taint = value_tags_at(&tags, e.from).cloned().collect();
    }
    let stats = FactStats {
        base_facts,
        derived_facts: dep.derived + tag.derived,
        flow_to: db.len("flowTo"),
        follow_by: db.len("followBy"),
        tags: db.len("OAuthTag"),
    };
    Ok(ScopeFacts {
        sdg,
        pts,
        db,
        stats,
    })
}
