//! Callgraph construction and demand-driven slicing: the callgraph automaton
//! is intersected with the automaton of an endpoint query, and the methods on
//! accepting paths form the analysis scope.

mod automaton;
mod query;

pub use automaton::{callgraph_to_automaton, extract_subcallgraph, intersect, Automaton, Symbol};
pub use query::{parse_endpoint_query, query_to_nfa, EndpointQuery};

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::osl::{Callee, IrProgram, Label};

/// Synthetic node standing for the request dispatcher that may invoke any
/// top-level function.
pub const DISPATCHER: &str = "<request>";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CallgraphError {
    #[error("callgraph automaton needs at least one entry method")]
    NoEntries,
    #[error("entry `{0}` is not a callgraph node")]
    UnknownEntry(String),
    #[error("endpoint query syntax error at offset {offset}: {msg}")]
    QuerySyntax { offset: usize, msg: String },
    #[error("endpoint query names unknown method `{0}`")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CallEdge {
    pub caller: String,
    pub callee: String,
    pub site: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Callgraph {
    pub nodes: BTreeSet<String>,
    /// Sorted by (caller, callee, site).
    pub edges: Vec<CallEdge>,
    pub builtins: BTreeSet<String>,
}

impl Callgraph {
    pub fn callees(&self, f: &str) -> BTreeSet<&str> {
        self.edges
            .iter()
            .filter(|e| e.caller == f)
            .map(|e| e.callee.as_str())
            .collect()
    }

    pub fn functions(&self) -> impl Iterator<Item = &String> {
        self.nodes.iter().filter(|n| !self.builtins.contains(*n))
    }

    /// Functions that serve as request entry points: those not called by
    /// another function, plus a representative of every call cycle that is
    /// unreachable from them.
    pub fn roots(&self) -> BTreeSet<String> {
        let called: BTreeSet<&str> = self
            .edges
            .iter()
            .filter(|e| e.caller != e.callee)
            .map(|e| e.callee.as_str())
            .collect();
        let mut roots: BTreeSet<String> = self
            .functions()
            .filter(|f| !called.contains(f.as_str()))
            .cloned()
            .collect();
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in &self.edges {
            adj.entry(&e.caller).or_default().push(&e.callee);
        }
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut stack: Vec<String> = roots.iter().cloned().collect();
        loop {
            while let Some(n) = stack.pop() {
                if seen.insert(n.clone()) {
                    for m in adj.get(n.as_str()).into_iter().flatten() {
                        stack.push(m.to_string());
                    }
                }
            }
            match self.functions().find(|f| !seen.contains(*f)) {
                Some(f) => {
                    roots.insert(f.clone());
                    stack.push(f.clone());
                }
                None => return roots,
            }
        }
    }

    /// Copy with the dispatcher node calling every root.
    pub fn with_dispatcher(&self) -> Callgraph {
        let mut g = self.clone();
        g.nodes.insert(DISPATCHER.to_string());
        for r in self.roots() {
            g.edges.push(CallEdge {
                caller: DISPATCHER.to_string(),
                callee: r,
                site: Label(u32::MAX),
            });
        }
        g.edges.sort();
        g
    }
}

/// One edge per resolved call site. Unresolved method calls are left out
/// (the frontend records a diagnostic for each).
pub fn build_callgraph(ir: &IrProgram) -> Callgraph {
    let mut cg = Callgraph::default();
    for f in &ir.functions {
        cg.nodes.insert(f.name.clone());
    }
    for (ins, callee) in ir.calls() {
        let name = match callee {
            Callee::Function(n) => n,
            Callee::Builtin(n) => {
                cg.builtins.insert(n.clone());
                n
            }
            Callee::Unresolved(_) => continue,
        };
        cg.nodes.insert(name.clone());
        cg.edges.push(CallEdge {
            caller: ins.function.clone(),
            callee: name.clone(),
            site: ins.label,
        });
    }
    cg.edges.sort();
    cg
}

/// Functions (not builtins) on a dispatcher-rooted call path matching `q`.
pub fn slice_functions(cg: &Callgraph, q: &EndpointQuery) -> BTreeSet<String> {
    let full = cg.with_dispatcher();
    let Ok(cga) = callgraph_to_automaton(&full, &BTreeSet::from([DISPATCHER.to_string()])) else {
        return BTreeSet::new();
    };
    let product = intersect(&cga, &query_to_nfa(q));
    extract_subcallgraph(&product, &full)
        .into_iter()
        .filter(|n| n != DISPATCHER && !cg.builtins.contains(n))
        .collect()
}
