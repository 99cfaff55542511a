//! Test-only oracles. Each one recomputes a result the library derives,
//! by the most direct method available, without calling the code under test.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;

use oauthscan::datalog::{EvalOptions, FactDb};
use oauthscan::property::{
    check_property, compile_signature, EdgeKind, NodeType, Outcome, Property, SigEdge, SigNode,
    SignatureGraph, TypedGraph,
};

pub fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn corpus_dir() -> PathBuf {
    workspace().join("corpus")
}

pub fn corpus_files() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "osl"))
        .collect();
    v.sort();
    v
}

// ---------------------------------------------------------------------------
// Datalog: random stratified programs and a naive evaluator.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum T {
    V(usize),
    C(usize),
}

#[derive(Debug, Clone)]
pub struct A {
    pub pred: usize,
    pub args: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct R {
    pub head: A,
    pub pos: Vec<A>,
    pub neg: Vec<A>,
    pub neq: Vec<(usize, usize)>,
}

/// Predicates: 0,1 extensional; 2,3 level one (positive recursion);
/// 4,5 level two (may negate anything below).
pub const ARITY: [usize; 6] = [2, 1, 2, 1, 2, 1];
pub const LEVEL: [usize; 6] = [0, 0, 1, 1, 2, 2];
const VARS: [&str; 4] = ["X", "Y", "Z", "W"];

pub fn pred_name(p: usize) -> String {
    ["e", "f", "p", "q", "r", "s"][p].to_string()
}

fn const_name(c: usize) -> String {
    format!("c{c}")
}

#[derive(Debug, Clone)]
pub struct DatalogInstance {
    pub domain: usize,
    pub facts: BTreeSet<(usize, Vec<usize>)>,
    pub rules: Vec<R>,
}

fn random_atom(rng: &mut impl Rng, preds: &[usize], domain: usize, nvars: usize) -> A {
    let pred = *preds.choose(rng).unwrap();
    let args = (0..ARITY[pred])
        .map(|_| {
            if rng.gen_bool(0.15) {
                T::C(rng.gen_range(0..domain))
            } else {
                T::V(rng.gen_range(0..nvars))
            }
        })
        .collect();
    A { pred, args }
}

fn vars_of(atoms: &[A]) -> Vec<usize> {
    let mut out = Vec::new();
    for a in atoms {
        for t in &a.args {
            if let T::V(v) = t {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
        }
    }
    out
}

fn pick(rng: &mut impl Rng, bound: &[usize], domain: usize) -> T {
    match bound.choose(rng) {
        Some(v) if rng.gen_bool(0.85) => T::V(*v),
        _ => T::C(rng.gen_range(0..domain)),
    }
}

pub fn random_instance(rng: &mut impl Rng) -> DatalogInstance {
    let domain = rng.gen_range(2..=5);
    let mut facts = BTreeSet::new();
    for _ in 0..rng.gen_range(1..=30) {
        let pred = rng.gen_range(0..2);
        facts.insert((
            pred,
            (0..ARITY[pred]).map(|_| rng.gen_range(0..domain)).collect(),
        ));
    }
    let mut rules = Vec::new();
    for _ in 0..rng.gen_range(1..=6) {
        let head_pred = rng.gen_range(2..6);
        let below: Vec<usize> = (0..6).filter(|&p| LEVEL[p] < LEVEL[head_pred]).collect();
        let usable: Vec<usize> = (0..6).filter(|&p| LEVEL[p] <= LEVEL[head_pred]).collect();
        let nvars = rng.gen_range(1..=VARS.len());
        let pos: Vec<A> = (0..rng.gen_range(1..=3))
            .map(|_| random_atom(rng, &usable, domain, nvars))
            .collect();
        let bound = vars_of(&pos);
        let mut neg = Vec::new();
        if LEVEL[head_pred] == 2 && rng.gen_bool(0.6) {
            let pred = *below.choose(rng).unwrap();
            let args = (0..ARITY[pred])
                .map(|_| pick(rng, &bound, domain))
                .collect();
            neg.push(A { pred, args });
        }
        let mut neq = Vec::new();
        if bound.len() >= 2 && rng.gen_bool(0.3) {
            let mut b = bound.clone();
            b.shuffle(rng);
            neq.push((b[0], b[1]));
        }
        let head = A {
            pred: head_pred,
            args: (0..ARITY[head_pred])
                .map(|_| pick(rng, &bound, domain))
                .collect(),
        };
        rules.push(R {
            head,
            pos,
            neg,
            neq,
        });
    }
    DatalogInstance {
        domain,
        facts,
        rules,
    }
}

fn term_text(t: &T) -> String {
    match t {
        T::V(v) => VARS[*v].to_string(),
        T::C(c) => format!("\"{}\"", const_name(*c)),
    }
}

fn atom_text(a: &A) -> String {
    let args: Vec<String> = a.args.iter().map(term_text).collect();
    format!("{}({})", pred_name(a.pred), args.join(", "))
}

impl DatalogInstance {
    pub fn program_text(&self) -> String {
        let mut s = String::new();
        for r in &self.rules {
            let mut body: Vec<String> = r.pos.iter().map(atom_text).collect();
            body.extend(r.neg.iter().map(|a| format!("!{}", atom_text(a))));
            body.extend(
                r.neq
                    .iter()
                    .map(|(a, b)| format!("{} != {}", VARS[*a], VARS[*b])),
            );
            s.push_str(&format!("{} :- {}.\n", atom_text(&r.head), body.join(", ")));
        }
        s
    }

    pub fn fact_db(&self) -> FactDb {
        let mut db = FactDb::new();
        for (p, n) in ARITY.iter().enumerate().take(2) {
            db.declare(&pred_name(p), *n).unwrap();
        }
        for (p, args) in &self.facts {
            let vals: Vec<String> = args.iter().map(|c| const_name(*c)).collect();
            db.insert(&pred_name(*p), &vals).unwrap();
        }
        db
    }

    /// Naive bottom-up evaluation, one level at a time, enumerating every
    /// assignment of rule variables over the domain.
    pub fn naive(&self) -> BTreeMap<String, BTreeSet<Vec<String>>> {
        let mut rel: Vec<BTreeSet<Vec<usize>>> = vec![BTreeSet::new(); 6];
        for (p, args) in &self.facts {
            rel[*p].insert(args.clone());
        }
        let ground = |t: &T, asg: &[usize]| match t {
            T::V(v) => asg[*v],
            T::C(c) => *c,
        };
        for level in 1..=2 {
            loop {
                let mut changed = false;
                for r in self.rules.iter().filter(|r| LEVEL[r.head.pred] == level) {
                    let n = VARS.len();
                    let total = self.domain.pow(n as u32);
                    for code in 0..total {
                        let asg: Vec<usize> = (0..n)
                            .map(|i| (code / self.domain.pow(i as u32)) % self.domain)
                            .collect();
                        let holds = |a: &A| {
                            let t: Vec<usize> = a.args.iter().map(|x| ground(x, &asg)).collect();
                            rel[a.pred].contains(&t)
                        };
                        if r.pos.iter().all(holds)
                            && !r.neg.iter().any(holds)
                            && r.neq.iter().all(|(a, b)| asg[*a] != asg[*b])
                        {
                            let t = r.head.args.iter().map(|x| ground(x, &asg)).collect();
                            if rel[r.head.pred].insert(t) {
                                changed = true;
                            }
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
        }
        (2..6)
            .map(|p| {
                let tuples = rel[p]
                    .iter()
                    .map(|t| t.iter().map(|c| const_name(*c)).collect())
                    .collect();
                (pred_name(p), tuples)
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// flowTo / followBy closure from base facts.

fn pairs(db: &FactDb, pred: &str, from: usize, to: usize) -> BTreeSet<(String, String)> {
    db.tuples(pred)
        .into_iter()
        .map(|t| (t[from].to_string(), t[to].to_string()))
        .collect()
}

fn reach(
    adj: &BTreeMap<String, BTreeSet<String>>,
    seeds: impl IntoIterator<Item = String>,
) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<String> = seeds.into_iter().collect();
    while let Some(n) = stack.pop() {
        if seen.insert(n.clone()) {
            stack.extend(adj.get(&n).into_iter().flatten().cloned());
        }
    }
    seen
}

fn adjacency(edges: &BTreeSet<(String, String)>) -> BTreeMap<String, BTreeSet<String>> {
    let mut adj: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (a, b) in edges {
        adj.entry(a.clone()).or_default().insert(b.clone());
    }
    adj
}

/// flowTo: any number of assignment steps, then one assignment or
/// allocation step, then any number of alias steps. followBy: a nonempty
/// chain of follow steps.
pub type Pairs = BTreeSet<(String, String)>;

pub fn closure_oracle(db: &FactDb) -> (Pairs, Pairs) {
    let assign = pairs(db, "assign", 2, 1);
    let mut last = assign.clone();
    last.extend(pairs(db, "alloc", 2, 1));
    let assign_adj = adjacency(&assign);
    let last_adj = adjacency(&last);
    let alias_adj = adjacency(&pairs(db, "alias", 0, 1));
    let mut flow = BTreeSet::new();
    for x in last_adj.keys() {
        let before = reach(&assign_adj, [x.clone()]);
        let stepped: BTreeSet<String> = before
            .iter()
            .flat_map(|y| last_adj.get(y).into_iter().flatten().cloned())
            .collect();
        for z in reach(&alias_adj, stepped) {
            flow.insert((x.clone(), z));
        }
    }
    let follow_adj = adjacency(&pairs(db, "follow", 0, 1));
    let mut follow = BTreeSet::new();
    for x in follow_adj.keys() {
        for z in reach(&follow_adj, follow_adj[x].iter().cloned()) {
            follow.insert((x.clone(), z));
        }
    }
    (flow, follow)
}

// ---------------------------------------------------------------------------
// Endpoint queries: a random query is also rendered as a `regex` pattern
// over one character per method name.

pub const METHODS: [&str; 5] = ["A:foo", "B:m", "C:bar", "D:baz", "E:qux"];

pub fn method_char(m: &str) -> char {
    (b'a' + METHODS.iter().position(|x| *x == m).unwrap() as u8) as char
}

/// (query text, regex over method chars)
pub fn random_query(rng: &mut impl Rng, alphabet: usize, depth: usize) -> (String, String) {
    let choice = if depth == 0 {
        rng.gen_range(0..2)
    } else {
        rng.gen_range(0..5)
    };
    match choice {
        0 => {
            let m = METHODS[rng.gen_range(0..alphabet)];
            (m.to_string(), method_char(m).to_string())
        }
        1 => (
            ".".to_string(),
            format!("[a-{}]", (b'a' + alphabet as u8 - 1) as char),
        ),
        2 => {
            let (a, ra) = random_query(rng, alphabet, depth - 1);
            let (b, rb) = random_query(rng, alphabet, depth - 1);
            (format!("({a} -> {b})"), format!("(?:{ra})(?:{rb})"))
        }
        3 => {
            let (a, ra) = random_query(rng, alphabet, depth - 1);
            let (b, rb) = random_query(rng, alphabet, depth - 1);
            (format!("({a} + {b})"), format!("(?:{ra}|{rb})"))
        }
        _ => {
            let (a, ra) = random_query(rng, alphabet, depth - 1);
            (format!("({a})*"), format!("(?:{ra})*"))
        }
    }
}

/// Random call edges over the first `alphabet` methods, plus entries.
pub fn random_callgraph(
    rng: &mut impl Rng,
    alphabet: usize,
) -> (Vec<(String, String)>, BTreeSet<String>) {
    let mut edges = Vec::new();
    for a in &METHODS[..alphabet] {
        for b in &METHODS[..alphabet] {
            if rng.gen_bool(0.35) {
                edges.push((a.to_string(), b.to_string()));
            }
        }
    }
    let mut entries = BTreeSet::new();
    entries.insert(METHODS[rng.gen_range(0..alphabet)].to_string());
    if rng.gen_bool(0.3) {
        entries.insert(METHODS[rng.gen_range(0..alphabet)].to_string());
    }
    (edges, entries)
}

/// Call strings of the graph: words of callee names along call edges
/// starting at an entry.
pub fn cg_accepts(edges: &[(String, String)], entries: &BTreeSet<String>, word: &[&str]) -> bool {
    let mut cur: BTreeSet<&str> = entries.iter().map(String::as_str).collect();
    for w in word {
        cur = edges
            .iter()
            .filter(|(a, b)| cur.contains(a.as_str()) && b == w)
            .map(|(_, b)| b.as_str())
            .collect();
        if cur.is_empty() {
            return false;
        }
    }
    true
}

pub fn words(alphabet: usize, max_len: usize) -> Vec<Vec<&'static str>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for m in &METHODS[..alphabet] {
                let mut x: Vec<&str> = w.clone();
                x.push(m);
                next.push(x);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

// ---------------------------------------------------------------------------
// Signature embedding by exhaustive enumeration of injective maps.

pub const TAGS: [&str; 3] = ["redirect", "error", "req_URI"];
pub const KINDS: [&str; 2] = ["call", "load"];

pub fn random_typed_graph(rng: &mut impl Rng) -> TypedGraph {
    let n = rng.gen_range(3..=12);
    let mut g = TypedGraph::with_nodes(n);
    for i in 0..n {
        for t in TAGS {
            if rng.gen_bool(0.3) {
                g.types[i].insert(NodeType::Tag(t.to_string()));
            }
        }
        if rng.gen_bool(0.3) {
            g.types[i].insert(NodeType::Kind(KINDS.choose(rng).unwrap().to_string()));
        }
    }
    for i in 0..n {
        if rng.gen_bool(0.25) {
            let th = rng.gen_range(0..n);
            let el = rng.gen_range(0..n);
            g.types[i].insert(NodeType::Branch);
            g.branches.insert(i, (th, el));
        }
    }
    for a in 0..n {
        for b in 0..n {
            if rng.gen_bool(0.3) {
                g.control.insert((a, b));
            }
            if rng.gen_bool(0.3) {
                g.data.insert((a, b));
            }
            if g.branches.contains_key(&b) && rng.gen_bool(0.4) {
                g.cond_flow.insert((a, b));
            }
        }
    }
    g
}

fn random_sig_nodes(rng: &mut impl Rng, names: &[String], branch_ok: bool) -> Vec<SigNode> {
    names
        .iter()
        .map(|v| {
            let mut types = BTreeSet::new();
            if rng.gen_bool(0.6) {
                types.insert(NodeType::Tag(TAGS.choose(rng).unwrap().to_string()));
            }
            if rng.gen_bool(0.2) {
                types.insert(NodeType::Kind(KINDS.choose(rng).unwrap().to_string()));
            }
            if branch_ok && rng.gen_bool(0.25) {
                types.insert(NodeType::Branch);
            }
            SigNode {
                var: v.clone(),
                types,
            }
        })
        .collect()
}

fn random_sig_edges(rng: &mut impl Rng, nodes: &[SigNode], from_pool: &[String]) -> Vec<SigEdge> {
    let mut edges = Vec::new();
    let is_branch = |v: &str| {
        nodes
            .iter()
            .any(|n| n.var == v && n.types.contains(&NodeType::Branch))
    };
    let names: Vec<String> = nodes.iter().map(|n| n.var.clone()).collect();
    for _ in 0..rng.gen_range(0..=nodes.len() + 1) {
        let from = from_pool.choose(rng).unwrap().clone();
        let to = names.choose(rng).unwrap().clone();
        let kind = if rng.gen_bool(0.5) {
            EdgeKind::Control
        } else {
            EdgeKind::Data
        };
        let e = SigEdge { from, to, kind };
        if !edges.contains(&e) {
            edges.push(e);
        }
    }
    // at most one then and one else arm per branch
    for n in &names {
        if is_branch(n) {
            for kind in [EdgeKind::Then, EdgeKind::Else] {
                if rng.gen_bool(0.5) {
                    let to = names.choose(rng).unwrap().clone();
                    edges.push(SigEdge {
                        from: n.clone(),
                        to,
                        kind,
                    });
                }
            }
        }
    }
    edges
}

pub fn random_signature(rng: &mut impl Rng) -> SignatureGraph {
    let k = rng.gen_range(1..=5);
    let names: Vec<String> = (1..=k).map(|i| format!("L{i}")).collect();
    let nodes = random_sig_nodes(rng, &names, true);
    let edges = random_sig_edges(rng, &nodes, &names);
    let mut sig = SignatureGraph {
        nodes,
        edges,
        forbidden: vec![],
    };
    if rng.gen_bool(0.4) {
        // one shared node plus one fresh node
        let shared = names.choose(rng).unwrap().clone();
        let shared_node = sig.node(&shared).unwrap().clone();
        let fresh = random_sig_nodes(rng, &["M1".to_string()], false).remove(0);
        let fnodes = vec![shared_node, fresh];
        let pool: Vec<String> = fnodes.iter().map(|n| n.var.clone()).collect();
        let fedges: Vec<SigEdge> = random_sig_edges(rng, &fnodes, &pool)
            .into_iter()
            .filter(|e| e.kind == EdgeKind::Control || e.kind == EdgeKind::Data)
            .filter(|e| !(e.from == shared && e.to == shared))
            .collect();
        sig.forbidden.push(SignatureGraph {
            nodes: fnodes,
            edges: fedges,
            forbidden: vec![],
        });
    }
    sig
}

/// A signature read off `g` itself: a few distinct nodes, a subset of
/// their types and of the edges among them. It embeds unless its forbidden
/// extension also does.
pub fn planted_signature(rng: &mut impl Rng, g: &TypedGraph) -> SignatureGraph {
    let k = rng.gen_range(1..=5.min(g.nodes.len()));
    let mut picked: Vec<usize> = (0..g.nodes.len()).collect();
    picked.shuffle(rng);
    picked.truncate(k);
    let var = |i: usize| format!("L{}", i + 1);
    let nodes: Vec<SigNode> = picked
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut types: BTreeSet<NodeType> = g.types[n]
                .iter()
                .filter(|_| rng.gen_bool(0.5))
                .cloned()
                .collect();
            if !g.branches.contains_key(&n) {
                types.remove(&NodeType::Branch);
            }
            SigNode { var: var(i), types }
        })
        .collect();
    let mut edges = Vec::new();
    for (i, &a) in picked.iter().enumerate() {
        for (j, &b) in picked.iter().enumerate() {
            let to_branch = nodes[j].types.contains(&NodeType::Branch);
            let mut push = |kind| {
                edges.push(SigEdge {
                    from: var(i),
                    to: var(j),
                    kind,
                })
            };
            if g.control.contains(&(a, b)) && rng.gen_bool(0.4) {
                push(EdgeKind::Control);
            }
            let data = if to_branch {
                g.cond_flow.contains(&(a, b))
            } else {
                g.data.contains(&(a, b))
            };
            if data && rng.gen_bool(0.4) {
                push(EdgeKind::Data);
            }
            if nodes[i].types.contains(&NodeType::Branch) {
                let (th, el) = g.branches[&a];
                if th == b && rng.gen_bool(0.5) {
                    push(EdgeKind::Then);
                }
                if el == b && rng.gen_bool(0.5) {
                    push(EdgeKind::Else);
                }
            }
        }
    }
    let mut sig = SignatureGraph {
        nodes,
        edges,
        forbidden: vec![],
    };
    if rng.gen_bool(0.4) {
        let shared = sig.nodes.choose(rng).unwrap().clone();
        let fresh = random_sig_nodes(rng, &["M1".to_string()], false).remove(0);
        let kind = if rng.gen_bool(0.5) {
            EdgeKind::Control
        } else {
            EdgeKind::Data
        };
        let (from, to) = if rng.gen_bool(0.5) {
            (shared.var.clone(), "M1".to_string())
        } else {
            ("M1".to_string(), shared.var.clone())
        };
        let kind = if kind == EdgeKind::Data
            && to == shared.var
            && shared.types.contains(&NodeType::Branch)
        {
            EdgeKind::Control
        } else {
            kind
        };
        sig.forbidden.push(SignatureGraph {
            nodes: vec![shared, fresh],
            edges: vec![SigEdge { from, to, kind }],
            forbidden: vec![],
        });
    }
    sig
}

fn has_type(g: &TypedGraph, n: usize, t: &NodeType) -> bool {
    match t {
        NodeType::Branch => g.branches.contains_key(&n),
        t => g.types[n].contains(t),
    }
}

fn edge_holds(g: &TypedGraph, sig_is_branch: bool, e: &SigEdge, a: usize, b: usize) -> bool {
    match e.kind {
        EdgeKind::Control => g.control.contains(&(a, b)),
        EdgeKind::Data if sig_is_branch => g.cond_flow.contains(&(a, b)),
        EdgeKind::Data => g.data.contains(&(a, b)),
        EdgeKind::Then => g.branches.get(&a).map(|x| x.0) == Some(b),
        EdgeKind::Else => g.branches.get(&a).map(|x| x.1) == Some(b),
    }
}

/// Injective extensions of `fixed` to `vars`, each variable ranging over
/// the nodes carrying all of its types.
fn injective_maps(
    sig: &SignatureGraph,
    vars: &[String],
    g: &TypedGraph,
    fixed: &BTreeMap<String, usize>,
) -> Vec<BTreeMap<String, usize>> {
    let mut out = vec![fixed.clone()];
    for v in vars {
        let types = &sig.node(v).unwrap().types;
        let candidates: Vec<usize> = (0..g.nodes.len())
            .filter(|&x| types.iter().all(|t| has_type(g, x, t)))
            .collect();
        let mut next = Vec::new();
        for m in &out {
            for &x in &candidates {
                if !m.values().any(|&y| y == x) {
                    let mut m2 = m.clone();
                    m2.insert(v.clone(), x);
                    next.push(m2);
                }
            }
        }
        out = next;
    }
    out
}

fn satisfies(sig: &SignatureGraph, g: &TypedGraph, m: &BTreeMap<String, usize>) -> bool {
    let branch = |v: &str| {
        sig.node(v)
            .is_some_and(|n| n.types.contains(&NodeType::Branch))
    };
    sig.nodes
        .iter()
        .all(|n| n.types.iter().all(|t| has_type(g, m[&n.var], t)))
        && sig
            .edges
            .iter()
            .all(|e| edge_holds(g, branch(&e.to), e, m[&e.from], m[&e.to]))
}

/// All embeddings: injective, type-preserving, edge-preserving maps with no
/// extension to any forbidden graph. Fresh forbidden nodes must be distinct
/// from each other and from the shared images.
pub fn embeddings_oracle(
    sig: &SignatureGraph,
    g: &TypedGraph,
) -> BTreeSet<BTreeMap<String, usize>> {
    let vars: Vec<String> = sig.nodes.iter().map(|n| n.var.clone()).collect();
    injective_maps(sig, &vars, g, &BTreeMap::new())
        .into_iter()
        .filter(|m| satisfies(sig, g, m))
        .filter(|m| {
            !sig.forbidden.iter().any(|f| {
                let fixed: BTreeMap<String, usize> = f
                    .nodes
                    .iter()
                    .filter_map(|n| m.get(&n.var).map(|x| (n.var.clone(), *x)))
                    .collect();
                let fresh: Vec<String> = f
                    .nodes
                    .iter()
                    .filter(|n| !m.contains_key(&n.var))
                    .map(|n| n.var.clone())
                    .collect();
                injective_maps(f, &fresh, g, &fixed)
                    .iter()
                    .any(|fm| satisfies(f, g, fm))
            })
        })
        .collect()
}

/// The signature as a property file, checked through `check_property`.
pub fn query_holds(sig: &SignatureGraph, g: &TypedGraph) -> bool {
    let mut text = String::from("% id: Goal\n% mode: presence\n");
    for r in compile_signature(sig, "Goal") {
        text.push_str(&format!("{r}\n"));
    }
    let p = Property::parse("Goal.dl", &text).unwrap();
    let v = check_property(&g.to_facts(), &p, EvalOptions::default(), false).unwrap();
    v.outcome == Outcome::Satisfied
}
