use std::collections::{BTreeMap, BTreeSet};

use super::pointsto::{ret_var, PointsTo};
use super::tags::{is_value_tag, TagConfig, VALUE_TAGS};
use crate::datalog::{evaluate_with, parse_program, EvalOptions, EvalStats, FactDb, Rule};
use crate::osl::{const_node, Callee, Cfg, InstrKind, Instruction, IrProgram, Label, Operand};

/// The dependence rules, verbatim.
pub const DEPENDENCE_RULES: &str = "
flowTo(X, Y) :- alloc(_, Y, X).
flowTo(X, Y) :- assign(_, Y, X).
flowTo(X, Z) :- assign(_, Y, X), flowTo(Y, Z).
flowTo(X, Z) :- alias(Y, Z), flowTo(X, Y).
followBy(X, Y) :- follow(X, Y).
followBy(X, Z) :- followBy(Y, Z), follow(X, Y).
";

/// Seeds tag their own statement; value tags also reach every statement
/// their value flows to.
pub const TAG_RULES: &str = "
OAuthTag(L, T) :- seedTag(L, T).
OAuthTag(L2, T) :- seedTag(L1, T), valueTag(T), flowTo(L1, L2), label(L2).
";

const ARITIES: &[(&str, usize)] = &[
    ("label", 1),
    ("entry", 2),
    ("assign", 3),
    ("alloc", 3),
    ("alias", 2),
    ("branch", 4),
    ("follow", 2),
    ("call", 2),
    ("load", 4),
    ("store", 4),
    ("seedTag", 2),
    ("valueTag", 1),
    ("flowTo", 2),
    ("followBy", 2),
    ("OAuthTag", 2),
];

fn rules(src: &str) -> Vec<Rule> {
    parse_program(src).expect("bundled rules parse").rules
}

pub fn dependence_rules() -> Vec<Rule> {
    rules(DEPENDENCE_RULES)
}

pub fn tag_rules() -> Vec<Rule> {
    rules(TAG_RULES)
}

fn node(op: &Operand) -> String {
    match op {
        Operand::Var(v) => v.clone(),
        Operand::Const(c) => const_node(c),
    }
}

/// Statements of the in-scope functions, in label order.
pub fn scope_instructions<'a>(
    ir: &'a IrProgram,
    scope: &'a BTreeSet<String>,
) -> impl Iterator<Item = &'a Instruction> {
    ir.instructions
        .iter()
        .filter(move |i| scope.contains(&i.function))
}

/// Base facts over the scope: the lowering facts, label-value bridges
/// (`assign(L, "L", x)` for each value read at L and `assign(L, y, "L")` for
/// the value it defines), parameter/return and heap flows, follow, alias.
pub fn base_fact_db(ir: &IrProgram, cfg: &Cfg, pts: &PointsTo, scope: &BTreeSet<String>) -> FactDb {
    let mut db = FactDb::new();
    for (p, n) in ARITIES {
        db.declare(p, *n).unwrap();
    }
    let in_scope = |l: Label| scope.contains(&ir.instr(l).function);
    for a in ir.base_facts() {
        let label: u32 = match &a.args[0] {
            crate::datalog::Term::Const(c) => c.parse().unwrap(),
            _ => unreachable!(),
        };
        if in_scope(Label(label)) {
            db.add_fact(&a).unwrap();
        }
    }
    let mut assign = |db: &mut FactDb, l: &str, y: &str, x: &str| {
        db.insert("assign", &[l, y, x]).unwrap();
    };
    for ins in scope_instructions(ir, scope) {
        let l = ins.label.to_string();
        let l = l.as_str();
        let def_bridge =
            |db: &mut FactDb, assign: &mut dyn FnMut(&mut FactDb, &str, &str, &str)| {
                if let Some(d) = ins.def() {
                    assign(db, l, d, l);
                }
            };
        match &ins.kind {
            InstrKind::Entry { .. } => {
                db.insert("entry", &[l, ins.function.as_str()]).unwrap();
            }
            InstrKind::Assign { args, .. } | InstrKind::Alloc { args, .. } => {
                for a in args {
                    assign(&mut db, l, l, &node(a));
                }
                def_bridge(&mut db, &mut assign);
            }
            InstrKind::Const { value, .. } => {
                assign(&mut db, l, l, &const_node(value));
                def_bridge(&mut db, &mut assign);
            }
            InstrKind::FieldLoad { base, field, .. } => {
                for c in pts.cells(base, field) {
                    assign(&mut db, l, l, &c);
                }
                def_bridge(&mut db, &mut assign);
            }
            InstrKind::FieldStore { base, field, value } => {
                assign(&mut db, l, l, &node(value));
                for c in pts.cells(base, field) {
                    assign(&mut db, l, &c, l);
                }
                assign(&mut db, l, base, l);
            }
            InstrKind::Call {
                callee: Callee::Function(g),
                args,
                ..
            } if scope.contains(g) => {
                let callee = ir.function(g).expect("resolved callee");
                for (p, a) in callee.params.iter().zip(args) {
                    assign(&mut db, l, p, &node(a));
                }
                assign(&mut db, l, l, &ret_var(g));
                def_bridge(&mut db, &mut assign);
                db.insert("follow", &[l.to_string(), callee.entry.to_string()])
                    .unwrap();
                // callee returns continue after the call site
                for &r in &callee.labels {
                    if matches!(ir.instr(r).kind, InstrKind::Return { .. }) {
                        for s in &ins.succ {
                            db.insert("follow", &[r.to_string(), s.to_string()])
                                .unwrap();
                        }
                    }
                }
            }
            InstrKind::Call { args, .. } => {
                for a in args {
                    assign(&mut db, l, l, &node(a));
                }
                def_bridge(&mut db, &mut assign);
            }
            InstrKind::Branch { cond, .. } => {
                assign(&mut db, l, l, cond);
            }
            InstrKind::Return { value } => {
                if let Some(v) = value {
                    assign(&mut db, l, l, &node(v));
                    assign(&mut db, l, &ret_var(&ins.function), l);
                }
            }
        }
    }
    for (a, b) in &cfg.follow {
        if in_scope(*a) {
            db.insert("follow", &[a.to_string(), b.to_string()])
                .unwrap();
        }
    }
    for (x, y) in pts.alias_pairs() {
        db.insert("alias", &[x, y]).unwrap();
    }
    db
}

pub fn derive_dependence_facts(
    db: FactDb,
    opts: EvalOptions,
) -> Result<(FactDb, EvalStats), crate::datalog::DatalogError> {
    evaluate_with(db, &dependence_rules(), opts)
}

fn source_name(var: &str) -> &str {
    let short = var.rsplit("::").next().unwrap_or(var);
    short.split('#').next().unwrap_or(short)
}

/// Access path of a field load, e.g. `request.redirect_uri`; loads through
/// temporaries are folded (`request.query.redirect_uri`).
pub fn access_path(ir: &IrProgram, l: Label) -> Option<String> {
    let ins = ir.instr(l);
    let InstrKind::FieldLoad { base, field, .. } = &ins.kind else {
        return None;
    };
    let f = ir.function(&ins.function)?;
    let prefix = if source_name(base).starts_with('%') {
        f.labels
            .iter()
            .find(|&&d| ir.instr(d).def() == Some(base.as_str()))
            .and_then(|&d| access_path(ir, d))
            .unwrap_or_else(|| source_name(base).to_string())
    } else {
        source_name(base).to_string()
    };
    Some(format!("{prefix}.{field}"))
}

/// Seed tags from the configuration: source and marker APIs at call sites,
/// markers at entries of same-named functions, field keys at loads.
pub fn seed_tags(
    ir: &IrProgram,
    scope: &BTreeSet<String>,
    config: &TagConfig,
) -> BTreeSet<(Label, String)> {
    let mut out = BTreeSet::new();
    for ins in scope_instructions(ir, scope) {
        let mut add = |tags: &[String]| {
            for t in tags {
                out.insert((ins.label, t.clone()));
            }
        };
        match &ins.kind {
            InstrKind::Call { callee, .. } => {
                let name = callee.name();
                if let Some(t) = config.sources.get(name) {
                    add(t);
                }
                if let Some(t) = config.markers.get(name) {
                    add(t);
                }
            }
            InstrKind::Entry { .. } => {
                if let Some(t) = config.markers.get(&ins.function) {
                    add(t);
                }
            }
            InstrKind::FieldLoad { .. } => {
                let path = access_path(ir, ins.label).unwrap();
                let tags: Vec<String> = config
                    .field_tags(&path)
                    .into_iter()
                    .map(str::to_string)
                    .collect();
                add(&tags);
            }
            _ => {}
        }
    }
    out
}

pub fn compute_oauth_tags(
    mut db: FactDb,
    seeds: &BTreeSet<(Label, String)>,
    opts: EvalOptions,
) -> Result<(FactDb, EvalStats), crate::datalog::DatalogError> {
    for t in VALUE_TAGS {
        db.insert("valueTag", &[*t])?;
    }
    for (l, t) in seeds {
        db.insert("seedTag", &[l.to_string(), t.clone()])?;
    }
    evaluate_with(db, &tag_rules(), opts)
}

/// Tags per label, from the `OAuthTag` relation.
pub fn tags_by_label(db: &FactDb) -> BTreeMap<Label, BTreeSet<String>> {
    let mut out: BTreeMap<Label, BTreeSet<String>> = BTreeMap::new();
    for t in db.tuples("OAuthTag") {
        if let Ok(n) = t[0].parse::<u32>() {
            out.entry(Label(n)).or_default().insert(t[1].to_string());
        }
    }
    out
}

pub fn value_tags_at(
    tags: &BTreeMap<Label, BTreeSet<String>>,
    l: Label,
) -> impl Iterator<Item = &String> {
    tags.get(&l)
        .into_iter()
        .flatten()
        .filter(|t| is_value_tag(t))
}
