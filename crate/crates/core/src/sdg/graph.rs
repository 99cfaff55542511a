use std::collections::{BTreeMap, BTreeSet};

use super::pointsto::PointsTo;
use super::SdgError;
use crate::callgraph::Callgraph;
use crate::osl::{Callee, InstrKind, IrProgram, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ControlKind {
    /// Intraprocedural: nearest enclosing branch or the function entry.
    Control,
    /// Call site to callee entry.
    Call,
    /// Actual argument `i` at the call site to the formal at the callee entry.
    ParamIn(usize),
    /// Callee return to the call site.
    ParamOut,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ControlEdge {
    pub from: Label,
    pub to: Label,
    pub kind: ControlKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DataEdge {
    pub from: Label,
    pub to: Label,
    /// Variable or heap cell carrying the value.
    pub via: String,
    /// Value tags at the defining statement.
    pub taint: BTreeSet<String>,
}

/// System dependence graph over the statements of the functions in scope.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sdg {
    pub scope: BTreeSet<String>,
    pub nodes: Vec<Label>,
    pub control: Vec<ControlEdge>,
    pub data: Vec<DataEdge>,
}

impl Sdg {
    pub fn edge_count(&self) -> usize {
        self.control.len() + self.data.len()
    }

    pub fn contains(&self, l: Label) -> bool {
        self.nodes.binary_search(&l).is_ok()
    }
}

pub fn build_sdg(
    ir: &IrProgram,
    cg: &Callgraph,
    pts: &PointsTo,
    scope: &BTreeSet<String>,
) -> Result<Sdg, SdgError> {
    if let Some(unknown) = scope.iter().find(|f| ir.function(f).is_none()) {
        return Err(SdgError::UnknownFunction(unknown.clone()));
    }
    let mut sdg = Sdg {
        scope: scope.clone(),
        ..Default::default()
    };
    let functions: Vec<_> = ir
        .functions
        .iter()
        .filter(|f| scope.contains(&f.name))
        .collect();
    for f in &functions {
        sdg.nodes.extend(f.labels.iter().copied());
    }
    sdg.nodes.sort();

    let in_scope_call = |site: Label| {
        cg.edges
            .iter()
            .any(|e| e.site == site && scope.contains(&e.caller) && scope.contains(&e.callee))
    };
    let mut stores: BTreeMap<String, Vec<Label>> = BTreeMap::new();
    let mut loads: BTreeMap<String, Vec<Label>> = BTreeMap::new();
    for f in &functions {
        for &l in &f.labels {
            let ins = ir.instr(l);
            if let Some(p) = ins.control_parent {
                sdg.control.push(ControlEdge {
                    from: p,
                    to: l,
                    kind: ControlKind::Control,
                });
            }
            match &ins.kind {
                InstrKind::Call {
                    callee: Callee::Function(g),
                    args,
                    ..
                } if in_scope_call(l) => {
                    let callee = ir.function(g).expect("resolved callee");
                    sdg.control.push(ControlEdge {
                        from: l,
                        to: callee.entry,
                        kind: ControlKind::Call,
                    });
                    for i in 0..args.len().min(callee.params.len()) {
                        sdg.control.push(ControlEdge {
                            from: l,
                            to: callee.entry,
                            kind: ControlKind::ParamIn(i),
                        });
                    }
                    for &r in &callee.labels {
                        if matches!(ir.instr(r).kind, InstrKind::Return { value: Some(_) }) {
                            sdg.control.push(ControlEdge {
                                from: r,
                                to: l,
                                kind: ControlKind::ParamOut,
                            });
                        }
                    }
                }
                InstrKind::FieldStore { base, field, .. } => {
                    for c in pts.cells(base, field) {
                        stores.entry(c).or_default().push(l);
                    }
                }
                InstrKind::FieldLoad { base, field, .. } => {
                    for c in pts.cells(base, field) {
                        loads.entry(c).or_default().push(l);
                    }
                }
                _ => {}
            }
        }

        // Reaching definitions; labels within a function are topologically
        // ordered because OSL has no loops.
        type Defs = BTreeMap<String, BTreeSet<Label>>;
        let mut reach_in: BTreeMap<Label, Defs> = BTreeMap::new();
        for &l in &f.labels {
            let ins = ir.instr(l);
            let input = reach_in.remove(&l).unwrap_or_default();
            for v in ins.uses() {
                for &d in input.get(v).into_iter().flatten() {
                    sdg.data.push(DataEdge {
                        from: d,
                        to: l,
                        via: v.to_string(),
                        taint: BTreeSet::new(),
                    });
                }
            }
            let mut out = input;
            let defined: Vec<&str> = match &ins.kind {
                InstrKind::Entry { params } => params.iter().map(String::as_str).collect(),
                _ => ins.def().into_iter().collect(),
            };
            for v in defined {
                out.insert(v.to_string(), BTreeSet::from([l]));
            }
            for s in &ins.succ {
                let slot = reach_in.entry(*s).or_default();
                for (v, ds) in &out {
                    slot.entry(v.clone())
                        .or_default()
                        .extend(ds.iter().copied());
                }
            }
        }
    }
    for (cell, ss) in &stores {
        for ld in loads.get(cell).into_iter().flatten() {
            for s in ss {
                sdg.data.push(DataEdge {
                    from: *s,
                    to: *ld,
                    via: cell.clone(),
                    taint: BTreeSet::new(),
                });
            }
        }
    }
    sdg.control.sort();
    sdg.control.dedup();
    sdg.data.sort();
    sdg.data.dedup();
    Ok(sdg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::callgraph::build_callgraph;
    use crate::osl::{lower_to_ir, parse_program};
    use crate::sdg::compute_points_to;

    fn sdg(src: &str, scope: &[&str]) -> (IrProgram, Result<Sdg, SdgError>) {
        let ir = lower_to_ir(&parse_program(src, &Default::default()).unwrap());
        let cg = build_callgraph(&ir);
        let scope: BTreeSet<String> = scope.iter().map(|s| s.to_string()).collect();
        let pts = compute_points_to(&ir, &scope);
        let g = build_sdg(&ir, &cg, &pts, &scope);
        (ir, g)
    }

    #[test]
    fn straight_line() {
        let (_, g) = sdg("fn f(){ let a = 1; let b = a; }", &["f"]);
        let g = g.unwrap();
        assert!(g
            .control
            .iter()
            .all(|e| e.from == Label(0) && e.kind == ControlKind::Control));
        assert_eq!(g.control.len(), 3);
        assert_eq!(g.data.len(), 1);
        assert_eq!((g.data[0].from, g.data[0].to), (Label(1), Label(2)));
    }

    #[test]
    fn branch_control_and_merging_defs() {
        let (_, g) = sdg("fn f(c){ let x = 1; if (c) { x = 2; } let y = x; }", &["f"]);
        let g = g.unwrap();
        assert!(g.control.contains(&ControlEdge {
            from: Label(2),
            to: Label(3),
            kind: ControlKind::Control
        }));
        let into_y: Vec<Label> = g
            .data
            .iter()
            .filter(|e| e.to == Label(4))
            .map(|e| e.from)
            .collect();
        assert_eq!(into_y, vec![Label(1), Label(3)]);
        // the parameter definition reaches the branch
        assert!(g
            .data
            .iter()
            .any(|e| e.from == Label(0) && e.to == Label(2)));
    }

    #[test]
    fn call_edges() {
        let (ir, g) = sdg(
            "fn main(a){ let r = f(a); } fn f(p){ return p; }",
            &["main", "f"],
        );
        let g = g.unwrap();
        let entry_f = ir.function("f").unwrap().entry;
        let kinds: Vec<ControlKind> = g
            .control
            .iter()
            .filter(|e| e.kind != ControlKind::Control)
            .map(|e| e.kind)
            .collect();
        assert_eq!(
            kinds,
            vec![
                ControlKind::Call,
                ControlKind::ParamIn(0),
                ControlKind::ParamOut
            ]
        );
        assert!(g
            .control
            .iter()
            .any(|e| e.to == entry_f && e.kind == ControlKind::Call));
    }

    #[test]
    fn sliced_scope_counts_only_scope() {
        let src = "fn main(){ f(); } fn f(){ let a = 1; } fn g(){ let b = 2; let c = 3; }";
        let (ir, g) = sdg(src, &["main", "f"]);
        let want: usize = ["main", "f"]
            .iter()
            .map(|n| ir.function(n).unwrap().labels.len())
            .sum();
        assert_eq!(g.unwrap().nodes.len(), want);
    }

    #[test]
    fn heap_edges() {
        let (_, g) = sdg("fn f(){ let o = new O(); o.k = 1; let v = o.k; }", &["f"]);
        let g = g.unwrap();
        assert!(g.data.iter().any(|e| e.via.ends_with(".k")));
    }

    #[test]
    fn unknown_scope_function() {
        let (_, g) = sdg("fn f(){}", &["nope"]);
        assert_eq!(g.unwrap_err(), SdgError::UnknownFunction("nope".into()));
    }
}
