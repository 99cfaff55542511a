use std::collections::{BTreeMap, BTreeSet};

use super::signature::{EdgeKind, NodeType, SigEdge, SignatureGraph};
use super::PropertyError;
use crate::datalog::FactDb;

/// Largest signature the brute-force enumerator accepts.
pub const MAX_SIGNATURE_NODES: usize = 10;

/// Statement-level view of a program SDG: typed nodes, the transitive
/// control (`followBy`) and data (`flowTo`) relations, branch arms, and
/// flows into branch conditions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypedGraph {
    pub nodes: Vec<String>,
    pub types: Vec<BTreeSet<NodeType>>,
    pub control: BTreeSet<(usize, usize)>,
    pub data: BTreeSet<(usize, usize)>,
    /// branch node -> (then, else)
    pub branches: BTreeMap<usize, (usize, usize)>,
    /// (source, branch node): the source flows into the branch condition
    pub cond_flow: BTreeSet<(usize, usize)>,
}

pub type Embedding = BTreeMap<String, usize>;

impl TypedGraph {
    pub fn with_nodes(n: usize) -> TypedGraph {
        TypedGraph {
            nodes: (0..n).map(|i| i.to_string()).collect(),
            types: vec![BTreeSet::new(); n],
            ..Default::default()
        }
    }

    /// Read the graph off derived facts: nodes are `label` facts.
    pub fn from_facts(db: &FactDb) -> TypedGraph {
        let mut g = TypedGraph::default();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for t in db.sorted_tuples("label") {
            index.insert(t[0].clone(), g.nodes.len());
            g.nodes.push(t[0].clone());
            g.types.push(BTreeSet::new());
        }
        let ix = |s: &str| index.get(s).copied();
        for t in db.tuples("OAuthTag") {
            if let Some(i) = ix(t[0]) {
                g.types[i].insert(NodeType::Tag(t[1].to_string()));
            }
        }
        for (k, _) in super::signature::NODE_KINDS {
            for t in db.tuples(k) {
                if let Some(i) = ix(t[0]) {
                    g.types[i].insert(NodeType::Kind(k.to_string()));
                }
            }
        }
        let mut conds: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for t in db.tuples("branch") {
            if let (Some(b), Some(th), Some(el)) = (ix(t[0]), ix(t[2]), ix(t[3])) {
                g.types[b].insert(NodeType::Branch);
                g.branches.insert(b, (th, el));
                conds.entry(t[1].to_string()).or_default().push(b);
            }
        }
        for t in db.tuples("followBy") {
            if let (Some(a), Some(b)) = (ix(t[0]), ix(t[1])) {
                g.control.insert((a, b));
            }
        }
        for t in db.tuples("flowTo") {
            let Some(a) = ix(t[0]) else { continue };
            if let Some(b) = ix(t[1]) {
                g.data.insert((a, b));
            }
            for &b in conds.get(t[1]).into_iter().flatten() {
                g.cond_flow.insert((a, b));
            }
        }
        g
    }

    /// Facts whose query semantics coincide with this graph.
    pub fn to_facts(&self) -> FactDb {
        let mut db = FactDb::new();
        for (p, n) in [
            ("label", 1),
            ("OAuthTag", 2),
            ("branch", 4),
            ("followBy", 2),
            ("flowTo", 2),
        ] {
            db.declare(p, n).unwrap();
        }
        for (k, n) in super::signature::NODE_KINDS {
            db.declare(k, *n).unwrap();
        }
        let name = |i: usize| self.nodes[i].as_str();
        for (i, ts) in self.types.iter().enumerate() {
            db.insert("label", &[name(i)]).unwrap();
            for t in ts {
                match t {
                    NodeType::Tag(tag) => {
                        db.insert("OAuthTag", &[name(i), tag]).unwrap();
                    }
                    NodeType::Kind(k) => {
                        let n = db.arity(k).unwrap_or(1);
                        let mut row = vec![name(i).to_string()];
                        row.resize(n, "-".to_string());
                        db.insert(k, &row).unwrap();
                    }
                    NodeType::Branch => {}
                }
            }
        }
        for (&b, &(th, el)) in &self.branches {
            let cond = format!("cond:{}", name(b));
            db.insert("branch", &[name(b), &cond, name(th), name(el)])
                .unwrap();
        }
        for &(a, b) in &self.control {
            db.insert("followBy", &[name(a), name(b)]).unwrap();
        }
        for &(a, b) in &self.data {
            db.insert("flowTo", &[name(a), name(b)]).unwrap();
        }
        for &(a, b) in &self.cond_flow {
            if self.branches.contains_key(&b) {
                db.insert("flowTo", &[name(a), &format!("cond:{}", name(b))])
                    .unwrap();
            }
        }
        db
    }

    fn has_types(&self, node: usize, types: &BTreeSet<NodeType>) -> bool {
        types.iter().all(|t| match t {
            NodeType::Branch => self.branches.contains_key(&node),
            t => self.types[node].contains(t),
        })
    }

    fn has_edge(&self, sig: &SignatureGraph, e: &SigEdge, a: usize, b: usize) -> bool {
        match e.kind {
            EdgeKind::Control => self.control.contains(&(a, b)),
            EdgeKind::Data if sig.is_branch(&e.to) => self.cond_flow.contains(&(a, b)),
            EdgeKind::Data => self.data.contains(&(a, b)),
            EdgeKind::Then => self.branches.get(&a).is_some_and(|arms| arms.0 == b),
            EdgeKind::Else => self.branches.get(&a).is_some_and(|arms| arms.1 == b),
        }
    }
}

/// Checks the three embedding rules for a complete map, forbidden
/// extensions included.
pub fn is_embedding(sig: &SignatureGraph, g: &TypedGraph, m: &Embedding) -> bool {
    valid_map(sig, g, m, &BTreeSet::new()) && !sig.forbidden.iter().any(|f| extends(f, g, m))
}

fn valid_map(sig: &SignatureGraph, g: &TypedGraph, m: &Embedding, shared: &BTreeSet<&str>) -> bool {
    if sig.nodes.iter().any(|n| !m.contains_key(&n.var)) {
        return false;
    }
    for (i, a) in sig.nodes.iter().enumerate() {
        if !g.has_types(m[&a.var], &a.types) {
            return false;
        }
        for b in &sig.nodes[i + 1..] {
            let both_shared = shared.contains(a.var.as_str()) && shared.contains(b.var.as_str());
            if !both_shared && m[&a.var] == m[&b.var] {
                return false;
            }
        }
    }
    sig.edges
        .iter()
        .all(|e| g.has_edge(sig, e, m[&e.from], m[&e.to]))
}

fn extends(f: &SignatureGraph, g: &TypedGraph, outer: &Embedding) -> bool {
    let shared: BTreeSet<&str> = f
        .vars()
        .into_iter()
        .filter(|x| outer.contains_key(*x))
        .collect();
    let mut m: Embedding = shared.iter().map(|x| (x.to_string(), outer[*x])).collect();
    let free: Vec<&str> = f
        .vars()
        .into_iter()
        .filter(|x| !shared.contains(x))
        .collect();
    let mut found = false;
    search(&free, 0, g, &mut m, &mut |m| {
        if valid_map(f, g, m, &shared) {
            found = true;
        }
        !found
    });
    found
}

/// Assign every node of `free` in turn, calling `visit` on complete maps;
/// `visit` returns false to stop.
fn search(
    free: &[&str],
    i: usize,
    g: &TypedGraph,
    m: &mut Embedding,
    visit: &mut dyn FnMut(&Embedding) -> bool,
) -> bool {
    if i == free.len() {
        return visit(m);
    }
    for n in 0..g.nodes.len() {
        m.insert(free[i].to_string(), n);
        if !search(free, i + 1, g, m, visit) {
            m.remove(free[i]);
            return false;
        }
    }
    m.remove(free[i]);
    true
}

/// Every embedding of `sig` into `g`, by exhaustive enumeration of maps
/// with per-node pruning on types, distinctness and edges between assigned
/// nodes.
pub fn check_embedding_bruteforce(
    sig: &SignatureGraph,
    g: &TypedGraph,
) -> Result<Vec<Embedding>, PropertyError> {
    if sig.nodes.len() > MAX_SIGNATURE_NODES {
        return Err(PropertyError::SignatureTooLarge(sig.nodes.len()));
    }
    let mut out = Vec::new();
    let mut m = Embedding::new();
    extend_pruned(sig, g, 0, &mut m, &mut out);
    out.retain(|m| !sig.forbidden.iter().any(|f| extends(f, g, m)));
    Ok(out)
}

fn extend_pruned(
    sig: &SignatureGraph,
    g: &TypedGraph,
    i: usize,
    m: &mut Embedding,
    out: &mut Vec<Embedding>,
) {
    if i == sig.nodes.len() {
        out.push(m.clone());
        return;
    }
    let node = &sig.nodes[i];
    for n in 0..g.nodes.len() {
        if m.values().any(|&x| x == n) || !g.has_types(n, &node.types) {
            continue;
        }
        m.insert(node.var.clone(), n);
        let ok = sig
            .edges
            .iter()
            .all(|e| match (m.get(&e.from), m.get(&e.to)) {
                (Some(&a), Some(&b)) => g.has_edge(sig, e, a, b),
                _ => true,
            });
        if ok {
            extend_pruned(sig, g, i + 1, m, out);
        }
        m.remove(&node.var);
    }
}
