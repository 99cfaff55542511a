use std::collections::{BTreeMap, BTreeSet};

use crate::datalog::{Atom, Literal, Rule, Term};

/// Base-fact kinds usable as node types, with their arity.
pub const NODE_KINDS: &[(&str, usize)] = &[
    ("call", 2),
    ("load", 4),
    ("store", 4),
    ("alloc", 3),
    ("entry", 2),
];

fn kind_arity(kind: &str) -> Option<usize> {
    NODE_KINDS.iter().find(|(k, _)| *k == kind).map(|(_, n)| *n)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeType {
    Tag(String),
    /// A statement carrying the given base fact, e.g. `call`.
    Kind(String),
    Branch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigNode {
    pub var: String,
    pub types: BTreeSet<NodeType>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    /// followBy
    Control,
    /// flowTo; into a branch node it means flow into the branch condition.
    Data,
    Then,
    Else,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SigEdge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
}

/// A typed signature graph. `forbidden` extensions may name nodes of this
/// graph (shared by variable name); an embedding is rejected when any
/// forbidden extension also embeds.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SignatureGraph {
    pub nodes: Vec<SigNode>,
    pub edges: Vec<SigEdge>,
    pub forbidden: Vec<SignatureGraph>,
}

impl SignatureGraph {
    pub fn node(&self, var: &str) -> Option<&SigNode> {
        self.nodes.iter().find(|n| n.var == var)
    }

    pub fn is_branch(&self, var: &str) -> bool {
        self.node(var)
            .is_some_and(|n| n.types.contains(&NodeType::Branch))
    }

    pub fn vars(&self) -> Vec<&str> {
        self.nodes.iter().map(|n| n.var.as_str()).collect()
    }
}

fn v(name: &str) -> Term {
    Term::var(name)
}

fn cond_var(node: &str) -> String {
    format!("X{node}")
}

fn body_of(g: &SignatureGraph, skip_neq: &BTreeSet<&str>) -> Vec<Literal> {
    let mut body = Vec::new();
    for n in &g.nodes {
        if n.types.is_empty() {
            body.push(Literal::Pos(Atom::new("label", vec![v(&n.var)])));
        }
        for t in &n.types {
            match t {
                NodeType::Tag(tag) => body.push(Literal::Pos(Atom::new(
                    "OAuthTag",
                    vec![v(&n.var), Term::constant(tag.clone())],
                ))),
                NodeType::Kind(k) => {
                    let mut args = vec![v(&n.var)];
                    args.resize(kind_arity(k).unwrap_or(1), Term::Wildcard);
                    body.push(Literal::Pos(Atom::new(k.clone(), args)));
                }
                NodeType::Branch => {
                    let arm = |kind: EdgeKind| {
                        g.edges
                            .iter()
                            .find(|e| e.from == n.var && e.kind == kind)
                            .map_or(Term::Wildcard, |e| v(&e.to))
                    };
                    body.push(Literal::Pos(Atom::new(
                        "branch",
                        vec![
                            v(&n.var),
                            v(&cond_var(&n.var)),
                            arm(EdgeKind::Then),
                            arm(EdgeKind::Else),
                        ],
                    )));
                }
            }
        }
    }
    for e in &g.edges {
        let atom = match e.kind {
            EdgeKind::Control => Atom::new("followBy", vec![v(&e.from), v(&e.to)]),
            EdgeKind::Data if g.is_branch(&e.to) => {
                Atom::new("flowTo", vec![v(&e.from), v(&cond_var(&e.to))])
            }
            EdgeKind::Data => Atom::new("flowTo", vec![v(&e.from), v(&e.to)]),
            EdgeKind::Then | EdgeKind::Else => continue,
        };
        body.push(Literal::Pos(atom));
    }
    for (i, a) in g.nodes.iter().enumerate() {
        for b in &g.nodes[i + 1..] {
            if skip_neq.contains(a.var.as_str()) && skip_neq.contains(b.var.as_str()) {
                continue;
            }
            body.push(Literal::Neq(v(&a.var), v(&b.var)));
        }
    }
    body
}

/// Compile a signature to rules deriving the nullary `head`. Forbidden
/// extensions become helper predicates used under negation.
pub fn compile_signature(g: &SignatureGraph, head: &str) -> Vec<Rule> {
    let mut rules = Vec::new();
    let mut body = body_of(g, &BTreeSet::new());
    for (i, f) in g.forbidden.iter().enumerate() {
        let shared: Vec<&str> = f
            .vars()
            .into_iter()
            .filter(|x| g.node(x).is_some())
            .collect();
        let helper = Atom::new(
            format!("{head}_forbidden{i}"),
            shared.iter().map(|s| v(s)).collect(),
        );
        // pairs of shared nodes are already distinct in the outer rule
        let inner = body_of(f, &shared.iter().copied().collect());
        rules.push(Rule::new(helper.clone(), inner));
        body.push(Literal::Neg(helper));
    }
    rules.push(Rule::new(Atom::new(head, vec![]), body));
    rules
}

/// Variables that denote statements in a rule body.
pub fn label_vars(body: &[Literal]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for lit in body {
        let Some(a) = lit.atom() else { continue };
        let positions: &[usize] = match a.pred.as_str() {
            "OAuthTag" | "label" => &[0],
            "followBy" | "follow" => &[0, 1],
            "branch" => &[0, 2, 3],
            p if kind_arity(p).is_some() => &[0],
            _ => &[],
        };
        for &i in positions {
            if let Some(Term::Var(x)) = a.args.get(i) {
                out.insert(x.clone());
            }
        }
    }
    // flowTo endpoints that are not branch conditions are labels too
    let conds: BTreeSet<&str> = body
        .iter()
        .filter_map(Literal::atom)
        .filter(|a| a.pred == "branch")
        .filter_map(|a| a.args.get(1).and_then(Term::as_var))
        .collect();
    let mut extra = Vec::new();
    for a in body
        .iter()
        .filter_map(Literal::atom)
        .filter(|a| a.pred == "flowTo")
    {
        for t in &a.args {
            if let Term::Var(x) = t {
                if !conds.contains(x.as_str()) {
                    extra.push(x.clone());
                }
            }
        }
    }
    out.extend(extra);
    out
}

/// Recover the signature graph of a rule, if its body stays within the
/// signature vocabulary and states pairwise distinctness of its statement
/// variables. `helpers` resolves negated predicates.
pub fn decompile_rule(rule: &Rule, helpers: &[Rule]) -> Option<SignatureGraph> {
    decompile_body(&rule.body, helpers, &BTreeSet::new())
}

fn decompile_body(
    body: &[Literal],
    helpers: &[Rule],
    shared: &BTreeSet<String>,
) -> Option<SignatureGraph> {
    let labels = label_vars(body);
    let mut types: BTreeMap<String, BTreeSet<NodeType>> = labels
        .iter()
        .map(|l| (l.clone(), BTreeSet::new()))
        .collect();
    let mut edges = Vec::new();
    let mut cond_of: BTreeMap<String, String> = BTreeMap::new();
    let mut neq: BTreeSet<(String, String)> = BTreeSet::new();
    let mut forbidden = Vec::new();
    let var = |t: &Term| t.as_var().map(str::to_string);

    for lit in body {
        if let Literal::Pos(a) = lit {
            if a.pred == "branch" {
                let [l, x, th, el] = &a.args[..] else {
                    return None;
                };
                let (l, x) = (var(l)?, var(x)?);
                if labels.contains(&x) || cond_of.insert(x, l.clone()).is_some() {
                    return None;
                }
                if !types.get_mut(&l)?.insert(NodeType::Branch) {
                    return None;
                }
                for (t, kind) in [(th, EdgeKind::Then), (el, EdgeKind::Else)] {
                    match t {
                        Term::Var(to) => edges.push(SigEdge {
                            from: l.clone(),
                            to: to.clone(),
                            kind,
                        }),
                        Term::Wildcard => {}
                        Term::Const(_) => return None,
                    }
                }
            }
        }
    }
    for lit in body {
        match lit {
            Literal::Pos(a) => match (a.pred.as_str(), &a.args[..]) {
                ("branch", _) => {}
                ("label", [Term::Var(l)]) => {
                    types.get(l)?;
                }
                ("OAuthTag", [Term::Var(l), Term::Const(t)]) => {
                    types.get_mut(l)?.insert(NodeType::Tag(t.clone()));
                }
                ("followBy", [Term::Var(x), Term::Var(y)]) => edges.push(SigEdge {
                    from: x.clone(),
                    to: y.clone(),
                    kind: EdgeKind::Control,
                }),
                ("flowTo", [Term::Var(x), Term::Var(y)]) => {
                    if !labels.contains(x) {
                        return None;
                    }
                    let to = match cond_of.get(y) {
                        Some(b) => b.clone(),
                        None => y.clone(),
                    };
                    // a plain flowTo into a branch statement is not expressible
                    if !cond_of.contains_key(y)
                        && types.get(y).is_some_and(|t| t.contains(&NodeType::Branch))
                    {
                        return None;
                    }
                    edges.push(SigEdge {
                        from: x.clone(),
                        to,
                        kind: EdgeKind::Data,
                    });
                }
                (k, [Term::Var(l), rest @ ..])
                    if kind_arity(k) == Some(rest.len() + 1)
                        && rest.iter().all(|t| *t == Term::Wildcard) =>
                {
                    types.get_mut(l)?.insert(NodeType::Kind(k.to_string()));
                }
                _ => return None,
            },
            Literal::Neq(Term::Var(a), Term::Var(b)) => {
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                neq.insert((a.clone(), b.clone()));
            }
            Literal::Neq(..) => return None,
            Literal::Neg(a) => {
                let args: Vec<String> = a.args.iter().map(var).collect::<Option<_>>()?;
                let defs: Vec<&Rule> = helpers.iter().filter(|r| r.head.pred == a.pred).collect();
                if defs.is_empty() {
                    return None;
                }
                for def in defs {
                    let formals: Vec<String> =
                        def.head.args.iter().map(var).collect::<Option<_>>()?;
                    if formals.len() != args.len() {
                        return None;
                    }
                    let renamed = rename(&def.body, &formals, &args);
                    let inner_shared: BTreeSet<String> = args.iter().cloned().collect();
                    forbidden.push(decompile_body(&renamed, &[], &inner_shared)?);
                }
            }
        }
    }
    for e in &edges {
        if !types.contains_key(&e.from) || !types.contains_key(&e.to) {
            return None;
        }
    }
    // one-to-one: all pairs distinct, except pairs of shared nodes
    let vars: Vec<&String> = types.keys().collect();
    for (i, a) in vars.iter().enumerate() {
        for b in &vars[i + 1..] {
            if shared.contains(*a) && shared.contains(*b) {
                continue;
            }
            if !neq.remove(&((*a).clone(), (*b).clone())) {
                return None;
            }
        }
    }
    if !neq.is_empty() {
        return None;
    }
    edges.sort();
    edges.dedup();
    Some(SignatureGraph {
        nodes: types
            .into_iter()
            .map(|(var, types)| SigNode { var, types })
            .collect(),
        edges,
        forbidden,
    })
}

fn rename(body: &[Literal], from: &[String], to: &[String]) -> Vec<Literal> {
    let map: BTreeMap<&str, &str> = from
        .iter()
        .map(String::as_str)
        .zip(to.iter().map(String::as_str))
        .collect();
    let term = |t: &Term| match t {
        Term::Var(x) => match map.get(x.as_str()) {
            Some(y) => Term::var(*y),
            // keep inner variables apart from outer ones
            None => Term::var(format!("{x}'")),
        },
        other => other.clone(),
    };
    let atom = |a: &Atom| Atom::new(a.pred.clone(), a.args.iter().map(term).collect());
    body.iter()
        .map(|l| match l {
            Literal::Pos(a) => Literal::Pos(atom(a)),
            Literal::Neg(a) => Literal::Neg(atom(a)),
            Literal::Neq(x, y) => Literal::Neq(term(x), term(y)),
        })
        .collect()
}
