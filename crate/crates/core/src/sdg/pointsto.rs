use std::collections::{BTreeMap, BTreeSet};

use crate::osl::{Callee, InstrKind, IrProgram, Operand};

/// Flow- and context-insensitive, field-sensitive inclusion-based points-to
/// sets over the functions in scope.
///
/// Abstract locations: allocation sites (`o<L>`), results of opaque calls
/// (`r<L>`), and one placeholder object per formal parameter (`p:<param>`).
/// Heap cells are named `<location>.<field>`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PointsTo {
    pub pts: BTreeMap<String, BTreeSet<String>>,
}

pub fn ret_var(function: &str) -> String {
    format!("{function}::%ret")
}

impl PointsTo {
    pub fn of(&self, v: &str) -> impl Iterator<Item = &String> {
        self.pts.get(v).into_iter().flatten()
    }

    /// Heap cells a field access `base.field` may touch.
    pub fn cells(&self, base: &str, field: &str) -> Vec<String> {
        self.of(base).map(|o| format!("{o}.{field}")).collect()
    }

    pub fn may_alias(&self, a: &str, b: &str) -> bool {
        match (self.pts.get(a), self.pts.get(b)) {
            (Some(x), Some(y)) => !x.is_disjoint(y),
            _ => false,
        }
    }

    /// Ordered pairs of distinct variables with intersecting points-to sets.
    pub fn alias_pairs(&self) -> BTreeSet<(String, String)> {
        let mut by_loc: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (v, locs) in &self.pts {
            if is_cell(v) {
                continue;
            }
            for l in locs {
                by_loc.entry(l).or_default().push(v);
            }
        }
        let mut out = BTreeSet::new();
        for vars in by_loc.values() {
            for a in vars {
                for b in vars {
                    if a != b {
                        out.insert((a.to_string(), b.to_string()));
                    }
                }
            }
        }
        out
    }
}

fn is_cell(node: &str) -> bool {
    node.contains('.')
}

pub fn compute_points_to(ir: &IrProgram, scope: &BTreeSet<String>) -> PointsTo {
    let mut p = PointsTo::default();
    let add = |p: &mut PointsTo, v: &str, locs: &BTreeSet<String>| -> bool {
        if locs.is_empty() {
            return false;
        }
        let set = p.pts.entry(v.to_string()).or_default();
        let before = set.len();
        set.extend(locs.iter().cloned());
        set.len() != before
    };
    let in_scope: Vec<_> = ir
        .functions
        .iter()
        .filter(|f| scope.contains(&f.name))
        .collect();
    for f in &in_scope {
        for param in &f.params {
            add(&mut p, param, &BTreeSet::from([format!("p:{param}")]));
        }
    }
    let get = |p: &PointsTo, v: &str| p.pts.get(v).cloned().unwrap_or_default();
    let op_pts = |p: &PointsTo, o: &Operand| match o {
        Operand::Var(v) => get(p, v),
        Operand::Const(_) => BTreeSet::new(),
    };
    loop {
        let mut changed = false;
        for f in &in_scope {
            for &l in &f.labels {
                let ins = ir.instr(l);
                match &ins.kind {
                    InstrKind::Alloc { dst, site, .. } => {
                        changed |= add(&mut p, dst, &BTreeSet::from([site.clone()]));
                    }
                    InstrKind::Assign {
                        dst,
                        op: crate::osl::Op::Copy,
                        args,
                    } => {
                        let s = op_pts(&p, &args[0]);
                        changed |= add(&mut p, dst, &s);
                    }
                    InstrKind::FieldLoad { dst, base, field } => {
                        for cell in p.cells(base, field) {
                            let s = get(&p, &cell);
                            changed |= add(&mut p, dst, &s);
                        }
                    }
                    InstrKind::FieldStore { base, field, value } => {
                        let s = op_pts(&p, value);
                        for cell in p.cells(base, field) {
                            changed |= add(&mut p, &cell, &s);
                        }
                    }
                    InstrKind::Call { dst, callee, args } => match callee {
                        Callee::Function(g) if scope.contains(g) => {
                            let callee_fn = ir.function(g).expect("resolved callee");
                            for (param, a) in callee_fn.params.iter().zip(args) {
                                let s = op_pts(&p, a);
                                changed |= add(&mut p, param, &s);
                            }
                            if let Some(d) = dst {
                                let s = get(&p, &ret_var(g));
                                changed |= add(&mut p, d, &s);
                            }
                        }
                        _ => {
                            if let Some(d) = dst {
                                changed |= add(&mut p, d, &BTreeSet::from([format!("r{l}")]));
                            }
                        }
                    },
                    InstrKind::Return { value: Some(v) } => {
                        let s = op_pts(&p, v);
                        changed |= add(&mut p, &ret_var(&ins.function), &s);
                    }
                    _ => {}
                }
            }
        }
        if !changed {
            return p;
        }
    }
}
