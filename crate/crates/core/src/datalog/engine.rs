use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::Instant;

use super::stratify::stratify;
use super::syntax::{Atom, Literal, Rule, Term};
use super::DatalogError;

pub const DEFAULT_MAX_DERIVED: usize = 10_000_000;

type Sym = u32;
type Tuple = Box<[Sym]>;
/// Bound-column key -> ascending tuple positions.
type Index = HashMap<Vec<Sym>, Vec<u32>>;

#[derive(Debug, Clone, Default)]
struct Interner {
    ids: HashMap<String, Sym>,
    names: Vec<String>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> Sym {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.names.len() as Sym;
        self.names.push(s.to_string());
        self.ids.insert(s.to_string(), id);
        id
    }

    fn get(&self, s: &str) -> Option<Sym> {
        self.ids.get(s).copied()
    }

    fn name(&self, id: Sym) -> &str {
        &self.names[id as usize]
    }
}

#[derive(Debug, Clone)]
struct Relation {
    arity: usize,
    tuples: Vec<Tuple>,
    set: HashSet<Tuple>,
    indexes: HashMap<u64, Index>,
}

fn key_of(t: &[Sym], mask: u64) -> Vec<Sym> {
    t.iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, s)| *s)
        .collect()
}

impl Relation {
    fn new(arity: usize) -> Self {
        Relation {
            arity,
            tuples: Vec::new(),
            set: HashSet::new(),
            indexes: HashMap::new(),
        }
    }

    fn insert(&mut self, t: Tuple) -> bool {
        if self.set.contains(&t) {
            return false;
        }
        let pos = self.tuples.len() as u32;
        for (mask, index) in self.indexes.iter_mut() {
            index.entry(key_of(&t, *mask)).or_default().push(pos);
        }
        self.set.insert(t.clone());
        self.tuples.push(t);
        true
    }

    fn build_index(&self, mask: u64) -> Index {
        let mut index: Index = HashMap::new();
        for (pos, t) in self.tuples.iter().enumerate() {
            index.entry(key_of(t, mask)).or_default().push(pos as u32);
        }
        index
    }

    fn ensure_index(&mut self, mask: u64) {
        if mask != 0 && !self.indexes.contains_key(&mask) {
            let index = self.build_index(mask);
            self.indexes.insert(mask, index);
        }
    }
}

/// Extensional and derived relations over an interned constant universe.
///
/// Relations have set semantics and are append-only during evaluation, which
/// lets semi-naive evaluation describe deltas as position ranges.
#[derive(Debug, Clone, Default)]
pub struct FactDb {
    interner: Interner,
    relations: BTreeMap<String, Relation>,
    strata: BTreeMap<String, usize>,
}

impl FactDb {
    pub fn new() -> Self {
        Self::default()
    }

    fn relation_mut(&mut self, pred: &str, arity: usize) -> Result<&mut Relation, DatalogError> {
        let rel = self
            .relations
            .entry(pred.to_string())
            .or_insert_with(|| Relation::new(arity));
        if rel.arity != arity {
            return Err(DatalogError::Arity {
                pred: pred.to_string(),
                expected: rel.arity,
                found: arity,
            });
        }
        Ok(rel)
    }

    /// Declare an (initially empty) relation so that arity is fixed up front.
    pub fn declare(&mut self, pred: &str, arity: usize) -> Result<(), DatalogError> {
        self.relation_mut(pred, arity).map(|_| ())
    }

    /// Insert a ground atom. Returns whether the tuple was new.
    pub fn add_fact(&mut self, atom: &Atom) -> Result<bool, DatalogError> {
        let mut values = Vec::with_capacity(atom.args.len());
        for t in &atom.args {
            match t {
                Term::Const(c) => values.push(c.as_str()),
                _ => return Err(DatalogError::NonGround(atom.to_string())),
            }
        }
        self.insert(&atom.pred, &values)
    }

    pub fn insert<S: AsRef<str>>(
        &mut self,
        pred: &str,
        values: &[S],
    ) -> Result<bool, DatalogError> {
        let tuple: Tuple = values
            .iter()
            .map(|v| self.interner.intern(v.as_ref()))
            .collect();
        let rel = self.relation_mut(pred, values.len())?;
        Ok(rel.insert(tuple))
    }

    /// Remove one tuple. Rebuilds the relation, so this is meant for rare edits.
    pub fn remove<S: AsRef<str>>(&mut self, pred: &str, values: &[S]) -> bool {
        let Some(tuple) = values
            .iter()
            .map(|v| self.interner.get(v.as_ref()))
            .collect::<Option<Vec<Sym>>>()
        else {
            return false;
        };
        let Some(rel) = self.relations.get_mut(pred) else {
            return false;
        };
        if !rel.set.contains(tuple.as_slice()) {
            return false;
        }
        let mut fresh = Relation::new(rel.arity);
        for t in rel.tuples.drain(..) {
            if *t != *tuple {
                fresh.insert(t);
            }
        }
        *rel = fresh;
        true
    }

    pub fn contains<S: AsRef<str>>(&self, pred: &str, values: &[S]) -> bool {
        let Some(rel) = self.relations.get(pred) else {
            return false;
        };
        let Some(tuple) = values
            .iter()
            .map(|v| self.interner.get(v.as_ref()))
            .collect::<Option<Vec<Sym>>>()
        else {
            return false;
        };
        rel.set.contains(tuple.as_slice())
    }

    pub fn arity(&self, pred: &str) -> Option<usize> {
        self.relations.get(pred).map(|r| r.arity)
    }

    pub fn len(&self, pred: &str) -> usize {
        self.relations.get(pred).map_or(0, |r| r.tuples.len())
    }

    pub fn is_empty(&self) -> bool {
        self.relations.values().all(|r| r.tuples.is_empty())
    }

    pub fn total_len(&self) -> usize {
        self.relations.values().map(|r| r.tuples.len()).sum()
    }

    pub fn predicates(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    /// Tuples of a relation in insertion order.
    pub fn tuples(&self, pred: &str) -> Vec<Vec<&str>> {
        self.relations.get(pred).map_or_else(Vec::new, |r| {
            r.tuples
                .iter()
                .map(|t| t.iter().map(|s| self.interner.name(*s)).collect())
                .collect()
        })
    }

    /// Tuples of a relation in natural lexicographic order.
    pub fn sorted_tuples(&self, pred: &str) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = self
            .tuples(pred)
            .into_iter()
            .map(|t| t.into_iter().map(str::to_string).collect())
            .collect();
        out.sort_by(|a, b| cmp_tuples(a, b));
        out
    }

    /// Stratum of each predicate defined by the last evaluated rule set.
    pub fn strata(&self) -> &BTreeMap<String, usize> {
        &self.strata
    }
}

/// Orders decimal integers numerically and before any other string.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let num = |s: &str| !s.is_empty() && s.bytes().all(|c| c.is_ascii_digit());
    match (num(a), num(b)) {
        (true, true) => {
            let (a, b) = (a.trim_start_matches('0'), b.trim_start_matches('0'));
            a.len().cmp(&b.len()).then_with(|| a.cmp(b))
        }
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => a.cmp(b),
    }
}

fn cmp_tuples<S: AsRef<str>>(a: &[S], b: &[S]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match natural_cmp(x.as_ref(), y.as_ref()) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CTerm {
    Var(usize),
    Const(Sym),
}

#[derive(Debug, Clone)]
struct CAtom {
    pred: String,
    terms: Vec<CTerm>,
}

/// A rule or query body compiled to variable slots.
#[derive(Debug, Clone)]
struct Compiled {
    head: Option<CAtom>,
    pos: Vec<CAtom>,
    neg: Vec<CAtom>,
    neq: Vec<(CTerm, CTerm)>,
    var_names: Vec<String>,
}

struct Compiler<'a> {
    vars: Vec<String>,
    slots: HashMap<String, usize>,
    resolve: &'a mut dyn FnMut(&str) -> Option<Sym>,
}

impl Compiler<'_> {
    fn term(&mut self, t: &Term) -> Option<CTerm> {
        Some(match t {
            Term::Var(v) => {
                let next = self.vars.len();
                let slot = *self.slots.entry(v.clone()).or_insert(next);
                if slot == next {
                    self.vars.push(v.clone());
                }
                CTerm::Var(slot)
            }
            Term::Wildcard => {
                self.vars.push(format!("_{}", self.vars.len()));
                CTerm::Var(self.vars.len() - 1)
            }
            Term::Const(c) => CTerm::Const((self.resolve)(c)?),
        })
    }

    fn atom(&mut self, a: &Atom) -> Option<CAtom> {
        let terms = a
            .args
            .iter()
            .map(|t| self.term(t))
            .collect::<Option<Vec<_>>>()?;
        Some(CAtom {
            pred: a.pred.clone(),
            terms,
        })
    }
}

/// Position range [lo, hi) of the tuples an atom may match.
type Range = (u32, u32);

struct Step<'a> {
    atom: &'a CAtom,
    mask: u64,
    range: Range,
}

struct Plan<'a> {
    steps: Vec<Step<'a>>,
}

fn plan(body: &[CAtom], first: Option<usize>, nvars: usize) -> (Vec<usize>, Vec<u64>) {
    let mut bound = vec![false; nvars];
    let mut order = Vec::with_capacity(body.len());
    let mut masks = Vec::with_capacity(body.len());
    let mut remaining: Vec<usize> = (0..body.len()).collect();
    let mask_for = |atom: &CAtom, bound: &[bool]| -> u64 {
        atom.terms
            .iter()
            .enumerate()
            .filter(|(_, t)| match t {
                CTerm::Const(_) => true,
                CTerm::Var(v) => bound[*v],
            })
            .fold(0u64, |m, (i, _)| m | (1 << i))
    };
    while !remaining.is_empty() {
        let pick = match first {
            Some(f) if order.is_empty() => remaining.iter().position(|&i| i == f).unwrap(),
            _ => {
                // most bound columns first; ties keep source order
                let mut best = 0;
                let mut best_score = -1i64;
                for (k, &i) in remaining.iter().enumerate() {
                    let score = mask_for(&body[i], &bound).count_ones() as i64;
                    if score > best_score {
                        best = k;
                        best_score = score;
                    }
                }
                best
            }
        };
        let i = remaining.remove(pick);
        masks.push(mask_for(&body[i], &bound));
        for t in &body[i].terms {
            if let CTerm::Var(v) = t {
                bound[*v] = true;
            }
        }
        order.push(i);
    }
    (order, masks)
}

struct JoinCtx<'a> {
    relations: &'a BTreeMap<String, Relation>,
    local: &'a HashMap<(String, u64), Index>,
}

impl JoinCtx<'_> {
    fn index(&self, pred: &str, mask: u64) -> Option<&Index> {
        self.relations
            .get(pred)
            .and_then(|r| r.indexes.get(&mask))
            .or_else(|| self.local.get(&(pred.to_string(), mask)))
    }

    fn holds(&self, atom: &CAtom, env: &[Sym]) -> bool {
        let Some(rel) = self.relations.get(&atom.pred) else {
            return false;
        };
        let t: Vec<Sym> = atom
            .terms
            .iter()
            .map(|t| match t {
                CTerm::Const(c) => *c,
                CTerm::Var(v) => env[*v],
            })
            .collect();
        rel.set.contains(t.as_slice())
    }

    /// Enumerate all satisfying environments, calling `emit` for each.
    fn join(
        &self,
        plan: &Plan<'_>,
        compiled: &Compiled,
        depth: usize,
        env: &mut Vec<Sym>,
        bound: &mut Vec<bool>,
        emit: &mut dyn FnMut(&[Sym]),
    ) {
        if depth == plan.steps.len() {
            for (l, r) in &compiled.neq {
                let v = |t: &CTerm| match t {
                    CTerm::Const(c) => *c,
                    CTerm::Var(v) => env[*v],
                };
                if v(l) == v(r) {
                    return;
                }
            }
            if compiled.neg.iter().any(|a| self.holds(a, env)) {
                return;
            }
            emit(env);
            return;
        }
        let step = &plan.steps[depth];
        let Some(rel) = self.relations.get(&step.atom.pred) else {
            return;
        };
        let (lo, hi) = step.range;
        let mut visit = |pos: u32, env: &mut Vec<Sym>, bound: &mut Vec<bool>| {
            let tuple = &rel.tuples[pos as usize];
            let mut newly = Vec::new();
            let mut ok = true;
            for (i, t) in step.atom.terms.iter().enumerate() {
                match t {
                    CTerm::Const(c) => {
                        if tuple[i] != *c {
                            ok = false;
                            break;
                        }
                    }
                    CTerm::Var(v) => {
                        if bound[*v] {
                            if env[*v] != tuple[i] {
                                ok = false;
                                break;
                            }
                        } else {
                            env[*v] = tuple[i];
                            bound[*v] = true;
                            newly.push(*v);
                        }
                    }
                }
            }
            if ok {
                self.join(plan, compiled, depth + 1, env, bound, emit);
            }
            for v in newly {
                bound[v] = false;
            }
        };
        if step.mask == 0 {
            for pos in lo..hi.min(rel.tuples.len() as u32) {
                visit(pos, env, bound);
            }
        } else {
            let key: Vec<Sym> = step
                .atom
                .terms
                .iter()
                .enumerate()
                .filter(|(i, _)| step.mask & (1 << i) != 0)
                .map(|(_, t)| match t {
                    CTerm::Const(c) => *c,
                    CTerm::Var(v) => env[*v],
                })
                .collect();
            let Some(index) = self.index(&step.atom.pred, step.mask) else {
                return;
            };
            if let Some(positions) = index.get(&key) {
                let start = positions.partition_point(|&p| p < lo);
                for &pos in &positions[start..] {
                    if pos >= hi {
                        break;
                    }
                    visit(pos, env, bound);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub max_derived: usize,
    pub deadline: Option<Instant>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            max_derived: DEFAULT_MAX_DERIVED,
            deadline: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalStats {
    pub derived: usize,
    pub rounds: usize,
}

/// Evaluate `rules` over `db` to the least (stratified) fixpoint.
pub fn evaluate(db: FactDb, rules: &[Rule]) -> Result<FactDb, DatalogError> {
    evaluate_with(db, rules, EvalOptions::default()).map(|(db, _)| db)
}

pub fn evaluate_with(
    mut db: FactDb,
    rules: &[Rule],
    opts: EvalOptions,
) -> Result<(FactDb, EvalStats), DatalogError> {
    for r in rules {
        r.check_safety()?;
    }
    let strata = stratify(rules)?;

    // Fix arities and intern rule constants.
    for r in rules {
        let atoms = std::iter::once(&r.head).chain(r.body.iter().filter_map(Literal::atom));
        for a in atoms {
            db.declare(&a.pred, a.args.len())?;
        }
    }
    let mut compiled_layers: Vec<Vec<Compiled>> = Vec::new();
    for layer in strata.layers(rules) {
        let mut out = Vec::new();
        for r in layer {
            let interner = &mut db.interner;
            let mut resolve = |c: &str| Some(interner.intern(c));
            let mut comp = Compiler {
                vars: Vec::new(),
                slots: HashMap::new(),
                resolve: &mut resolve,
            };
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            let mut neq = Vec::new();
            for lit in &r.body {
                match lit {
                    Literal::Pos(a) => pos.push(comp.atom(a).unwrap()),
                    Literal::Neg(a) => neg.push(comp.atom(a).unwrap()),
                    Literal::Neq(l, rr) => {
                        neq.push((comp.term(l).unwrap(), comp.term(rr).unwrap()))
                    }
                }
            }
            let head = comp.atom(&r.head).unwrap();
            out.push(Compiled {
                head: Some(head),
                pos,
                neg,
                neq,
                var_names: comp.vars,
            });
        }
        compiled_layers.push(out);
    }
    for (pred, s) in &strata.stratum_of {
        if rules.iter().any(|r| &r.head.pred == pred) {
            db.strata.insert(pred.clone(), *s);
        }
    }

    let mut stats = EvalStats::default();
    let empty_local = HashMap::new();
    for layer in &compiled_layers {
        let heads: HashSet<&str> = layer
            .iter()
            .map(|c| c.head.as_ref().unwrap().pred.as_str())
            .collect();
        let mut first_round = true;
        // per recursive predicate: delta = [lo, hi)
        let mut delta: HashMap<String, Range> = HashMap::new();
        loop {
            if let Some(d) = opts.deadline {
                if Instant::now() > d {
                    return Err(DatalogError::Timeout);
                }
            }
            stats.rounds += 1;
            let snapshot: HashMap<String, u32> = db
                .relations
                .iter()
                .map(|(k, r)| (k.clone(), r.tuples.len() as u32))
                .collect();
            let mut any_new = false;
            for c in layer {
                let recursive: Vec<usize> = c
                    .pos
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| heads.contains(a.pred.as_str()))
                    .map(|(i, _)| i)
                    .collect();
                // (delta position or None for the full first round)
                let variants: Vec<Option<usize>> = if first_round {
                    vec![None]
                } else {
                    recursive
                        .iter()
                        .copied()
                        .filter(|i| delta.get(&c.pos[*i].pred).is_some_and(|(lo, hi)| lo < hi))
                        .map(Some)
                        .collect()
                };
                let mut produced: Vec<Tuple> = Vec::new();
                for variant in variants {
                    let (order, masks) = plan(&c.pos, variant, c.var_names.len());
                    for (i, m) in order.iter().zip(&masks) {
                        if let Some(rel) = db.relations.get_mut(&c.pos[*i].pred) {
                            rel.ensure_index(*m);
                        }
                    }
                    let steps = order
                        .iter()
                        .zip(&masks)
                        .map(|(&i, &mask)| {
                            let atom = &c.pos[i];
                            let full = snapshot.get(&atom.pred).copied().unwrap_or(0);
                            let range = match variant {
                                Some(d) if recursive.contains(&i) => {
                                    let (lo, hi) = delta[&atom.pred];
                                    match i.cmp(&d) {
                                        Ordering::Less => (0, lo),
                                        Ordering::Equal => (lo, hi),
                                        Ordering::Greater => (0, hi),
                                    }
                                }
                                _ => (0, full),
                            };
                            Step { atom, mask, range }
                        })
                        .collect();
                    let plan = Plan { steps };
                    let ctx = JoinCtx {
                        relations: &db.relations,
                        local: &empty_local,
                    };
                    let head = c.head.as_ref().unwrap();
                    let mut env = vec![0; c.var_names.len()];
                    let mut bound = vec![false; c.var_names.len()];
                    ctx.join(&plan, c, 0, &mut env, &mut bound, &mut |env| {
                        produced.push(
                            head.terms
                                .iter()
                                .map(|t| match t {
                                    CTerm::Const(s) => *s,
                                    CTerm::Var(v) => env[*v],
                                })
                                .collect(),
                        );
                    });
                }
                let rel = db
                    .relations
                    .get_mut(&c.head.as_ref().unwrap().pred)
                    .unwrap();
                for t in produced {
                    if rel.insert(t) {
                        any_new = true;
                        stats.derived += 1;
                        if stats.derived > opts.max_derived {
                            return Err(DatalogError::TooManyTuples {
                                limit: opts.max_derived,
                            });
                        }
                    }
                }
            }
            if !any_new {
                break;
            }
            delta = heads
                .iter()
                .map(|p| {
                    let lo = snapshot.get(*p).copied().unwrap_or(0);
                    let hi = db.relations[*p].tuples.len() as u32;
                    (p.to_string(), (lo, hi))
                })
                .collect();
            first_round = false;
        }
    }
    Ok((db, stats))
}

/// A satisfying assignment: variable name -> constant.
pub type Binding = BTreeMap<String, String>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryResult {
    pub bindings: Vec<Binding>,
    /// Variables in order of first appearance; the sort key of `bindings`.
    pub vars: Vec<String>,
    pub warnings: Vec<String>,
}

impl QueryResult {
    pub fn is_true(&self) -> bool {
        !self.bindings.is_empty()
    }
}

/// All bindings of the named variables that satisfy the conjunction,
/// ordered lexicographically by value tuple (variables in order of first
/// appearance).
pub fn query(db: &FactDb, body: &[Literal]) -> Result<QueryResult, DatalogError> {
    let rule_like = Rule::new(
        Atom::new(
            "__query",
            body.iter()
                .filter_map(Literal::atom)
                .flat_map(|a| a.vars())
                .map(Term::var)
                .collect(),
        ),
        body.to_vec(),
    );
    rule_like.check_safety()?;

    let mut result = QueryResult::default();
    for lit in body {
        if let Some(a) = lit.atom() {
            match db.arity(&a.pred) {
                None => result
                    .warnings
                    .push(format!("unknown predicate `{}`", a.pred)),
                Some(n) if n != a.args.len() => {
                    return Err(DatalogError::Arity {
                        pred: a.pred.clone(),
                        expected: n,
                        found: a.args.len(),
                    })
                }
                _ => {}
            }
        }
    }

    let interner = &db.interner;
    let mut resolve = |c: &str| interner.get(c);
    let mut comp = Compiler {
        vars: Vec::new(),
        slots: HashMap::new(),
        resolve: &mut resolve,
    };
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut neq = Vec::new();
    for lit in body {
        match lit {
            Literal::Pos(a) => match comp.atom(a) {
                Some(c) => pos.push(c),
                // a constant outside the universe cannot match
                None => return Ok(finish(result, &comp.vars, Vec::new())),
            },
            Literal::Neg(a) => {
                if let Some(c) = comp.atom(a) {
                    neg.push(c);
                }
            }
            Literal::Neq(l, r) => match (comp.term(l), comp.term(r)) {
                (Some(l), Some(r)) => neq.push((l, r)),
                (None, None) if l == r => {
                    return Ok(finish(result, &comp.vars, Vec::new()));
                }
                _ => {}
            },
        }
    }
    let compiled = Compiled {
        head: None,
        pos,
        neg,
        neq,
        var_names: comp.vars,
    };
    let (order, masks) = plan(&compiled.pos, None, compiled.var_names.len());
    let mut local: HashMap<(String, u64), Index> = HashMap::new();
    for (&i, &m) in order.iter().zip(&masks) {
        let pred = &compiled.pos[i].pred;
        if let Some(rel) = db.relations.get(pred) {
            if m != 0 && !rel.indexes.contains_key(&m) {
                local
                    .entry((pred.clone(), m))
                    .or_insert_with(|| rel.build_index(m));
            }
        }
    }
    let steps = order
        .iter()
        .zip(&masks)
        .map(|(&i, &mask)| {
            let atom = &compiled.pos[i];
            let full = db
                .relations
                .get(&atom.pred)
                .map_or(0, |r| r.tuples.len() as u32);
            Step {
                atom,
                mask,
                range: (0, full),
            }
        })
        .collect();
    let ctx = JoinCtx {
        relations: &db.relations,
        local: &local,
    };
    let named: Vec<usize> = compiled
        .var_names
        .iter()
        .enumerate()
        .filter(|(_, n)| !n.starts_with('_'))
        .map(|(i, _)| i)
        .collect();
    let mut rows: HashSet<Vec<Sym>> = HashSet::new();
    let mut env = vec![0; compiled.var_names.len()];
    let mut bound = vec![false; compiled.var_names.len()];
    ctx.join(
        &Plan { steps },
        &compiled,
        0,
        &mut env,
        &mut bound,
        &mut |env| {
            rows.insert(named.iter().map(|&i| env[i]).collect());
        },
    );
    let rows: Vec<Vec<String>> = rows
        .into_iter()
        .map(|r| {
            r.into_iter()
                .map(|s| interner.name(s).to_string())
                .collect()
        })
        .collect();
    let names: Vec<String> = named
        .iter()
        .map(|&i| compiled.var_names[i].clone())
        .collect();
    Ok(finish(result, &names, rows))
}

fn finish(mut result: QueryResult, vars: &[String], mut rows: Vec<Vec<String>>) -> QueryResult {
    let vars: Vec<String> = vars
        .iter()
        .filter(|v| !v.starts_with('_'))
        .cloned()
        .collect();
    rows.sort_by(|a, b| cmp_tuples(a, b));
    result.bindings = rows
        .into_iter()
        .map(|r| vars.iter().cloned().zip(r).collect())
        .collect();
    result.vars = vars;
    result
}
