use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::syntax::{Literal, Rule};
use super::DatalogError;

/// Stratum assignment for every predicate mentioned by a rule set.
///
/// Predicates that only occur in bodies (extensional relations) sit in
/// stratum 0 together with everything that depends on them positively.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Strata {
    pub stratum_of: BTreeMap<String, usize>,
}

impl Strata {
    pub fn count(&self) -> usize {
        self.stratum_of.values().max().map_or(0, |m| m + 1)
    }

    pub fn of(&self, pred: &str) -> usize {
        self.stratum_of.get(pred).copied().unwrap_or(0)
    }

    /// Predicates defined by rules, grouped by stratum in ascending order.
    pub fn layers<'a>(&self, rules: &'a [Rule]) -> Vec<Vec<&'a Rule>> {
        let mut layers = vec![Vec::new(); self.count().max(1)];
        for r in rules {
            layers[self.of(&r.head.pred)].push(r);
        }
        layers
    }
}

/// Assign predicates to strata so that every negated dependency points to a
/// strictly lower stratum. Fails with the offending cycle when a predicate
/// depends negatively on itself through recursion.
pub fn stratify(rules: &[Rule]) -> Result<Strata, DatalogError> {
    let mut graph: DiGraph<String, bool> = DiGraph::new();
    let mut nodes: BTreeMap<String, NodeIndex> = BTreeMap::new();
    let mut node = |g: &mut DiGraph<String, bool>, name: &str| {
        *nodes
            .entry(name.to_string())
            .or_insert_with(|| g.add_node(name.to_string()))
    };

    let mut edges = BTreeSet::new();
    for r in rules {
        let head = node(&mut graph, &r.head.pred);
        for lit in &r.body {
            let (atom, negated) = match lit {
                Literal::Pos(a) => (a, false),
                Literal::Neg(a) => (a, true),
                Literal::Neq(..) => continue,
            };
            let body = node(&mut graph, &atom.pred);
            if edges.insert((body, head, negated)) {
                graph.add_edge(body, head, negated);
            }
        }
    }

    let sccs = tarjan_scc(&graph);
    let mut component = vec![0usize; graph.node_count()];
    for (i, scc) in sccs.iter().enumerate() {
        for n in scc {
            component[n.index()] = i;
        }
    }
    for &(from, to, negated) in &edges {
        if negated && component[from.index()] == component[to.index()] {
            let mut cycle: Vec<String> = sccs[component[from.index()]]
                .iter()
                .map(|n| graph[*n].clone())
                .collect();
            cycle.sort();
            return Err(DatalogError::NotStratifiable { cycle });
        }
    }

    // tarjan_scc yields components in reverse topological order.
    let mut level = vec![0usize; sccs.len()];
    for ci in (0..sccs.len()).rev() {
        for n in &sccs[ci] {
            for e in graph.edges_directed(*n, petgraph::Direction::Incoming) {
                use petgraph::visit::EdgeRef;
                let src = component[e.source().index()];
                if src == ci {
                    continue;
                }
                let need = level[src] + usize::from(*e.weight());
                level[ci] = level[ci].max(need);
            }
        }
    }

    let stratum_of = nodes
        .iter()
        .map(|(name, idx)| (name.clone(), level[component[idx.index()]]))
        .collect();
    Ok(Strata { stratum_of })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datalog::syntax::parse_program;

    fn strata(src: &str) -> Result<Strata, DatalogError> {
        stratify(&parse_program(src).unwrap().rules)
    }

    #[test]
    fn one_negation_level() {
        let s = strata("p(X) :- base(X), !q(X). q(X) :- base(X).").unwrap();
        assert_eq!(s.of("q"), 0);
        assert_eq!(s.of("base"), 0);
        assert!(s.of("p") > s.of("q"));
    }

    #[test]
    fn self_negation_is_rejected() {
        match strata("p(X) :- base(X), !p(X).") {
            Err(DatalogError::NotStratifiable { cycle }) => assert_eq!(cycle, vec!["p"]),
            other => panic!("expected error, got {other:?}"),
        }
    }

    #[test]
    fn negation_through_recursion_names_cycle() {
        match strata("p(X) :- b(X), !q(X). q(X) :- p(X).") {
            Err(DatalogError::NotStratifiable { cycle }) => assert_eq!(cycle, vec!["p", "q"]),
            other => panic!("expected error, got {other:?}"),
        }
    }

    #[test]
    fn positive_rules_share_one_stratum() {
        let s = strata("a(X,Y) :- e(X,Y). a(X,Z) :- e(X,Y), a(Y,Z). b(X) :- a(X,_).").unwrap();
        assert_eq!(s.count(), 1);
    }

    #[test]
    fn chained_negation_levels() {
        let s = strata("q(X) :- b(X), !r(X). p(X) :- b(X), !q(X). r(X) :- b(X).").unwrap();
        assert_eq!((s.of("r"), s.of("q"), s.of("p")), (0, 1, 2));
    }
}
