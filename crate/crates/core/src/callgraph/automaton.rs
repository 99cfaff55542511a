use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{Callgraph, CallgraphError};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Epsilon,
    /// Matches any method name.
    Any,
    Name(String),
}

impl Symbol {
    pub fn matches(&self, name: &str) -> bool {
        match self {
            Symbol::Epsilon => false,
            Symbol::Any => true,
            Symbol::Name(n) => n == name,
        }
    }
}

/// Nondeterministic finite automaton over method names.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Automaton {
    /// Display name per state. For a product, the CGA component's name.
    pub names: Vec<String>,
    pub transitions: BTreeSet<(usize, Symbol, usize)>,
    pub initial: BTreeSet<usize>,
    pub accepting: BTreeSet<usize>,
    /// For product automata: (left state, right state) per state.
    pub pairs: Vec<(usize, usize)>,
}

impl Automaton {
    pub fn add_state(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    pub fn state_count(&self) -> usize {
        self.names.len()
    }

    pub fn has_epsilon(&self) -> bool {
        self.transitions
            .iter()
            .any(|(_, s, _)| *s == Symbol::Epsilon)
    }

    fn outgoing(&self) -> Vec<Vec<(&Symbol, usize)>> {
        let mut out = vec![Vec::new(); self.names.len()];
        for (from, sym, to) in &self.transitions {
            out[*from].push((sym, *to));
        }
        out
    }

    fn closure(&self, out: &[Vec<(&Symbol, usize)>], seed: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut set = seed.clone();
        let mut stack: Vec<usize> = seed.iter().copied().collect();
        while let Some(s) = stack.pop() {
            for (sym, t) in &out[s] {
                if **sym == Symbol::Epsilon && set.insert(*t) {
                    stack.push(*t);
                }
            }
        }
        set
    }

    /// Whether the automaton accepts the given sequence of names.
    pub fn accepts<S: AsRef<str>>(&self, word: &[S]) -> bool {
        let out = self.outgoing();
        let mut cur = self.closure(&out, &self.initial);
        for w in word {
            let next: BTreeSet<usize> = cur
                .iter()
                .flat_map(|s| out[*s].iter())
                .filter(|(sym, _)| sym.matches(w.as_ref()))
                .map(|(_, t)| *t)
                .collect();
            cur = self.closure(&out, &next);
            if cur.is_empty() {
                return false;
            }
        }
        cur.iter().any(|s| self.accepting.contains(s))
    }

    /// Equivalent automaton without epsilon transitions (same states).
    pub fn remove_epsilon(&self) -> Automaton {
        if !self.has_epsilon() {
            return self.clone();
        }
        let out = self.outgoing();
        let mut res = Automaton {
            names: self.names.clone(),
            initial: self.initial.clone(),
            pairs: self.pairs.clone(),
            ..Default::default()
        };
        for s in 0..self.names.len() {
            let cl = self.closure(&out, &BTreeSet::from([s]));
            if cl.iter().any(|c| self.accepting.contains(c)) {
                res.accepting.insert(s);
            }
            for c in &cl {
                for (sym, t) in &out[*c] {
                    if **sym != Symbol::Epsilon {
                        res.transitions.insert((s, (*sym).clone(), *t));
                    }
                }
            }
        }
        res
    }

    /// States reachable from an initial state that can reach an accepting one.
    pub fn useful_states(&self) -> BTreeSet<usize> {
        let n = self.names.len();
        let mut fwd = vec![Vec::new(); n];
        let mut bwd = vec![Vec::new(); n];
        for (a, _, b) in &self.transitions {
            fwd[*a].push(*b);
            bwd[*b].push(*a);
        }
        let sweep = |adj: &[Vec<usize>], seed: &BTreeSet<usize>| {
            let mut seen = seed.clone();
            let mut stack: Vec<usize> = seed.iter().copied().collect();
            while let Some(s) = stack.pop() {
                for t in &adj[s] {
                    if seen.insert(*t) {
                        stack.push(*t);
                    }
                }
            }
            seen
        };
        let reach = sweep(&fwd, &self.initial);
        let coreach = sweep(&bwd, &self.accepting);
        reach.intersection(&coreach).copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.useful_states().is_empty()
    }
}

fn meet(a: &Symbol, b: &Symbol) -> Option<Symbol> {
    match (a, b) {
        (Symbol::Epsilon, _) | (_, Symbol::Epsilon) => None,
        (Symbol::Any, s) | (s, Symbol::Any) => Some(s.clone()),
        (Symbol::Name(x), Symbol::Name(y)) => (x == y).then(|| a.clone()),
    }
}

/// The callgraph automaton: one state per method, a transition labelled g
/// for every call edge (f, g), initial states = `entries`, all accepting.
pub fn callgraph_to_automaton(
    cg: &Callgraph,
    entries: &BTreeSet<String>,
) -> Result<Automaton, CallgraphError> {
    if entries.is_empty() {
        return Err(CallgraphError::NoEntries);
    }
    let mut a = Automaton::default();
    let mut index = BTreeMap::new();
    for n in &cg.nodes {
        index.insert(n.clone(), a.add_state(n.clone()));
    }
    for e in entries {
        let &s = index
            .get(e)
            .ok_or_else(|| CallgraphError::UnknownEntry(e.clone()))?;
        a.initial.insert(s);
    }
    a.accepting = (0..a.state_count()).collect();
    for e in &cg.edges {
        a.transitions.insert((
            index[&e.caller],
            Symbol::Name(e.callee.clone()),
            index[&e.callee],
        ));
    }
    Ok(a)
}

/// Product construction restricted to reachable pairs. Epsilon transitions
/// of either side are eliminated first.
pub fn intersect(cga: &Automaton, qa: &Automaton) -> Automaton {
    let left = cga.remove_epsilon();
    let right = qa.remove_epsilon();
    let lout = left.outgoing();
    let rout = right.outgoing();

    let mut prod = Automaton::default();
    let mut ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    let mut visit =
        |prod: &mut Automaton, queue: &mut VecDeque<(usize, usize)>, p: (usize, usize)| {
            *ids.entry(p).or_insert_with(|| {
                let id = prod.add_state(left.names[p.0].clone());
                prod.pairs.push(p);
                if left.accepting.contains(&p.0) && right.accepting.contains(&p.1) {
                    prod.accepting.insert(id);
                }
                queue.push_back(p);
                id
            })
        };
    for &l in &left.initial {
        for &r in &right.initial {
            let id = visit(&mut prod, &mut queue, (l, r));
            prod.initial.insert(id);
        }
    }
    while let Some((l, r)) = queue.pop_front() {
        let from = visit(&mut prod, &mut queue, (l, r));
        for (ls, lt) in &lout[l] {
            for (rs, rt) in &rout[r] {
                if let Some(sym) = meet(ls, rs) {
                    let to = visit(&mut prod, &mut queue, (*lt, *rt));
                    prod.transitions.insert((from, sym, to));
                }
            }
        }
    }
    prod
}

/// Methods on some accepting path of the product, restricted to `cg` nodes.
pub fn extract_subcallgraph(product: &Automaton, cg: &Callgraph) -> BTreeSet<String> {
    product
        .useful_states()
        .into_iter()
        .map(|s| product.names[s].clone())
        .filter(|n| cg.nodes.contains(n))
        .collect()
}
