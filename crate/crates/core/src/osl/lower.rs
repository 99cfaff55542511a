use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::ast::{BinOp, Expr, LValue, Lit, SourceProgram, Stmt};
use crate::datalog::Atom;

/// Program-wide statement label; ordinals follow source order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(transparent)]
pub struct Label(pub u32);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Label {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

const UNPATCHED: Label = Label(u32::MAX);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Var(String),
    Const(Lit),
}

impl Operand {
    pub fn as_var(&self) -> Option<&str> {
        match self {
            Operand::Var(v) => Some(v),
            Operand::Const(_) => None,
        }
    }
}

/// Name of the value node representing a literal in data-flow facts.
pub fn const_node(lit: &Lit) -> String {
    format!("const:{lit}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Copy,
    Eq,
    Ne,
    And,
    Or,
    Add,
    Not,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Callee {
    Function(String),
    Builtin(String),
    Unresolved(String),
}

impl Callee {
    pub fn name(&self) -> &str {
        match self {
            Callee::Function(n) | Callee::Builtin(n) | Callee::Unresolved(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstrKind {
    /// Function entry; holds the qualified formal parameters.
    Entry {
        params: Vec<String>,
    },
    Assign {
        dst: String,
        op: Op,
        args: Vec<Operand>,
    },
    Const {
        dst: String,
        value: Lit,
    },
    Alloc {
        dst: String,
        class: String,
        site: String,
        args: Vec<Operand>,
    },
    FieldLoad {
        dst: String,
        base: String,
        field: String,
    },
    FieldStore {
        base: String,
        field: String,
        value: Operand,
    },
    /// Builtin calls receive a method receiver as operand 0.
    Call {
        dst: Option<String>,
        callee: Callee,
        args: Vec<Operand>,
    },
    Branch {
        cond: String,
        then: Label,
        els: Label,
    },
    Return {
        value: Option<Operand>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub label: Label,
    pub function: String,
    pub kind: InstrKind,
    pub succ: Vec<Label>,
    /// Nearest enclosing branch, or the function entry. `None` for entries.
    pub control_parent: Option<Label>,
    pub line: usize,
}

impl Instruction {
    pub fn def(&self) -> Option<&str> {
        match &self.kind {
            InstrKind::Assign { dst, .. }
            | InstrKind::Const { dst, .. }
            | InstrKind::Alloc { dst, .. }
            | InstrKind::FieldLoad { dst, .. } => Some(dst),
            InstrKind::Call { dst, .. } => dst.as_deref(),
            _ => None,
        }
    }

    /// Variables read by the instruction.
    pub fn uses(&self) -> Vec<&str> {
        fn ops(args: &[Operand]) -> Vec<&str> {
            args.iter().filter_map(Operand::as_var).collect()
        }
        match &self.kind {
            InstrKind::Entry { .. } | InstrKind::Const { .. } => Vec::new(),
            InstrKind::Assign { args, .. }
            | InstrKind::Alloc { args, .. }
            | InstrKind::Call { args, .. } => ops(args),
            InstrKind::FieldLoad { base, .. } => vec![base],
            InstrKind::FieldStore { base, value, .. } => {
                let mut v = vec![base.as_str()];
                v.extend(value.as_var());
                v
            }
            InstrKind::Branch { cond, .. } => vec![cond],
            InstrKind::Return { value } => value.iter().filter_map(Operand::as_var).collect(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            InstrKind::Entry { .. } => "entry",
            InstrKind::Assign { .. } => "assign",
            InstrKind::Const { .. } => "const",
            InstrKind::Alloc { .. } => "alloc",
            InstrKind::FieldLoad { .. } => "load",
            InstrKind::FieldStore { .. } => "store",
            InstrKind::Call { .. } => "call",
            InstrKind::Branch { .. } => "branch",
            InstrKind::Return { .. } => "return",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrFunction {
    pub name: String,
    pub params: Vec<String>,
    pub entry: Label,
    pub labels: Vec<Label>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrProgram {
    /// Indexed by label ordinal.
    pub instructions: Vec<Instruction>,
    pub functions: Vec<IrFunction>,
    pub builtins: BTreeSet<String>,
    pub diagnostics: Vec<String>,
}

impl IrProgram {
    pub fn instr(&self, l: Label) -> &Instruction {
        &self.instructions[l.index()]
    }

    pub fn function(&self, name: &str) -> Option<&IrFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_names(&self) -> BTreeSet<String> {
        self.functions.iter().map(|f| f.name.clone()).collect()
    }

    pub fn calls(&self) -> impl Iterator<Item = (&Instruction, &Callee)> {
        self.instructions.iter().filter_map(|i| match &i.kind {
            InstrKind::Call { callee, .. } => Some((i, callee)),
            _ => None,
        })
    }

    /// Lowering-level facts: assign, alloc, branch, call, load, store, label.
    pub fn base_facts(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        for i in &self.instructions {
            let l = i.label.to_string();
            out.push(Atom::fact("label", &[&l]));
            match &i.kind {
                InstrKind::Assign { dst, args, .. } => {
                    for a in args {
                        let src = match a {
                            Operand::Var(v) => v.clone(),
                            Operand::Const(c) => const_node(c),
                        };
                        out.push(Atom::fact("assign", &[l.as_str(), dst, &src]));
                    }
                }
                InstrKind::Const { dst, value } => {
                    out.push(Atom::fact("assign", &[l.as_str(), dst, &const_node(value)]));
                }
                InstrKind::Alloc { dst, site, .. } => {
                    out.push(Atom::fact("alloc", &[l.as_str(), dst, site]));
                }
                InstrKind::Branch { cond, then, els } => {
                    out.push(Atom::fact(
                        "branch",
                        &[l.clone(), cond.clone(), then.to_string(), els.to_string()],
                    ));
                }
                InstrKind::Call { callee, .. } => {
                    out.push(Atom::fact("call", &[l.as_str(), callee.name()]));
                }
                InstrKind::FieldLoad { dst, base, field } => {
                    out.push(Atom::fact("load", &[l.as_str(), dst, base, field]));
                }
                InstrKind::FieldStore { base, field, value } => {
                    let v = match value {
                        Operand::Var(v) => v.clone(),
                        Operand::Const(c) => const_node(c),
                    };
                    out.push(Atom::fact("store", &[l.as_str(), base, field, &v]));
                }
                InstrKind::Entry { .. } | InstrKind::Return { .. } => {}
            }
        }
        out
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Next,
    Then,
    Else,
}

struct FnCtx {
    name: String,
    scopes: Vec<HashMap<String, String>>,
    declared: HashMap<String, usize>,
    temps: usize,
    pending: Vec<(Label, Slot)>,
    parents: Vec<Label>,
    labels: Vec<Label>,
    line: usize,
}

struct Lowerer<'a> {
    prog: &'a SourceProgram,
    out: Vec<Instruction>,
    diagnostics: Vec<String>,
}

/// Lower a checked program to labeled three-address IR.
pub fn lower_to_ir(prog: &SourceProgram) -> IrProgram {
    let mut lw = Lowerer {
        prog,
        out: Vec::new(),
        diagnostics: Vec::new(),
    };
    let mut functions = Vec::new();
    for f in &prog.functions {
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| format!("{}::{p}", f.name))
            .collect();
        let mut cx = FnCtx {
            name: f.name.clone(),
            scopes: vec![f
                .params
                .iter()
                .cloned()
                .zip(params.iter().cloned())
                .collect()],
            declared: f.params.iter().map(|p| (p.clone(), 1)).collect(),
            temps: 0,
            pending: Vec::new(),
            parents: Vec::new(),
            labels: Vec::new(),
            line: f.pos.line,
        };
        let entry = lw.emit(
            &mut cx,
            InstrKind::Entry {
                params: params.clone(),
            },
        );
        cx.parents.push(entry);
        lw.block(&mut cx, &f.body);
        if !cx.pending.is_empty() {
            lw.emit(&mut cx, InstrKind::Return { value: None });
        }
        functions.push(IrFunction {
            name: f.name.clone(),
            params,
            entry,
            labels: cx.labels,
            file: f.file.clone(),
        });
    }
    IrProgram {
        instructions: lw.out,
        functions,
        builtins: prog.builtins.clone(),
        diagnostics: lw.diagnostics,
    }
}

impl Lowerer<'_> {
    fn emit(&mut self, cx: &mut FnCtx, kind: InstrKind) -> Label {
        let label = Label(self.out.len() as u32);
        for (from, slot) in std::mem::take(&mut cx.pending) {
            let ins = &mut self.out[from.index()];
            match (slot, &mut ins.kind) {
                (Slot::Then, InstrKind::Branch { then, .. }) => {
                    *then = label;
                    ins.succ[0] = label;
                }
                (Slot::Else, InstrKind::Branch { els, .. }) => {
                    *els = label;
                    ins.succ[1] = label;
                }
                _ => ins.succ.push(label),
            }
        }
        let terminal = matches!(kind, InstrKind::Return { .. } | InstrKind::Branch { .. });
        let succ = if matches!(kind, InstrKind::Branch { .. }) {
            vec![UNPATCHED, UNPATCHED]
        } else {
            Vec::new()
        };
        self.out.push(Instruction {
            label,
            function: cx.name.clone(),
            kind,
            succ,
            control_parent: cx.parents.last().copied(),
            line: cx.line,
        });
        cx.labels.push(label);
        if !terminal {
            cx.pending.push((label, Slot::Next));
        }
        label
    }

    fn lookup(&self, cx: &FnCtx, name: &str) -> Option<String> {
        cx.scopes.iter().rev().find_map(|s| s.get(name).cloned())
    }

    fn declare(&self, cx: &mut FnCtx, name: &str) -> String {
        let n = cx.declared.entry(name.to_string()).or_insert(0);
        *n += 1;
        let q = if *n == 1 {
            format!("{}::{name}", cx.name)
        } else {
            format!("{}::{name}#{n}", cx.name)
        };
        cx.scopes
            .last_mut()
            .unwrap()
            .insert(name.to_string(), q.clone());
        q
    }

    fn temp(&self, cx: &mut FnCtx) -> String {
        let t = format!("{}::%t{}", cx.name, cx.temps);
        cx.temps += 1;
        t
    }

    fn block(&mut self, cx: &mut FnCtx, stmts: &[Stmt]) {
        cx.scopes.push(HashMap::new());
        for s in stmts {
            self.stmt(cx, s);
        }
        cx.scopes.pop();
    }

    fn stmt(&mut self, cx: &mut FnCtx, s: &Stmt) {
        match s {
            Stmt::Let(name, e, pos) => {
                cx.line = pos.line;
                // the initializer is evaluated before the name comes into scope
                let dst_slot = self.temp_free_target(cx, e);
                let q = self.declare(cx, name);
                self.into(cx, e, q, dst_slot);
            }
            Stmt::Assign(LValue::Var(name, _), e, pos) => {
                cx.line = pos.line;
                let q = self.lookup(cx, name).expect("checked by resolver");
                let pre = self.temp_free_target(cx, e);
                self.into(cx, e, q, pre);
            }
            Stmt::Assign(LValue::Field(base, field), e, pos) => {
                cx.line = pos.line;
                let base = self.var_of(cx, base);
                let value = self.value(cx, e);
                self.emit(
                    cx,
                    InstrKind::FieldStore {
                        base,
                        field: field.clone(),
                        value,
                    },
                );
            }
            Stmt::If(c, then, els, pos) => {
                cx.line = pos.line;
                let cond = self.var_of(cx, c);
                let br = self.emit(
                    cx,
                    InstrKind::Branch {
                        cond,
                        then: UNPATCHED,
                        els: UNPATCHED,
                    },
                );
                cx.parents.push(br);
                cx.pending = vec![(br, Slot::Then)];
                self.block(cx, then);
                let mut open = std::mem::take(&mut cx.pending);
                cx.pending = vec![(br, Slot::Else)];
                if let Some(els) = els {
                    self.block(cx, els);
                }
                open.append(&mut cx.pending);
                cx.pending = open;
                cx.parents.pop();
            }
            Stmt::Return(e, pos) => {
                cx.line = pos.line;
                let value = e.as_ref().map(|e| self.value(cx, e));
                self.emit(cx, InstrKind::Return { value });
            }
            Stmt::Expr(e, pos) => {
                cx.line = pos.line;
                match e {
                    Expr::Call { .. } => self.call(cx, e, None),
                    _ => {
                        let t = self.temp(cx);
                        let pre = self.temp_free_target(cx, e);
                        self.into(cx, e, t, pre);
                    }
                }
            }
        }
    }

    /// Evaluate the operands of `e` ahead of the final instruction, so that a
    /// `let` name is bound only after its initializer has been lowered.
    fn temp_free_target(&mut self, cx: &mut FnCtx, e: &Expr) -> Prepared {
        match e {
            Expr::Var(..) | Expr::Lit(_) => Prepared::Ops(vec![self.value(cx, e)]),
            Expr::Field(b, _) => Prepared::Ops(vec![Operand::Var(self.var_of(cx, b))]),
            Expr::Call { .. } => Prepared::Call(self.call_parts(cx, e)),
            Expr::New(_, args) => Prepared::Ops(args.iter().map(|a| self.value(cx, a)).collect()),
            Expr::Binary(_, l, r) => {
                let l = self.value(cx, l);
                let r = self.value(cx, r);
                Prepared::Ops(vec![l, r])
            }
            Expr::Not(x) => Prepared::Ops(vec![self.value(cx, x)]),
        }
    }

    fn into(&mut self, cx: &mut FnCtx, e: &Expr, dst: String, pre: Prepared) {
        let kind = match (e, pre) {
            (Expr::Var(..) | Expr::Lit(_), Prepared::Ops(mut ops)) => match ops.pop().unwrap() {
                Operand::Const(value) => InstrKind::Const { dst, value },
                v => InstrKind::Assign {
                    dst,
                    op: Op::Copy,
                    args: vec![v],
                },
            },
            (Expr::Field(_, field), Prepared::Ops(mut ops)) => {
                let Some(Operand::Var(base)) = ops.pop() else {
                    unreachable!()
                };
                InstrKind::FieldLoad {
                    dst,
                    base,
                    field: field.clone(),
                }
            }
            (Expr::Call { .. }, Prepared::Call((callee, args))) => InstrKind::Call {
                dst: Some(dst),
                callee,
                args,
            },
            (Expr::New(class, _), Prepared::Ops(args)) => InstrKind::Alloc {
                dst,
                class: class.clone(),
                site: format!("o{}", self.out.len()),
                args,
            },
            (Expr::Binary(op, ..), Prepared::Ops(args)) => InstrKind::Assign {
                dst,
                op: match op {
                    BinOp::Eq => Op::Eq,
                    BinOp::Ne => Op::Ne,
                    BinOp::And => Op::And,
                    BinOp::Or => Op::Or,
                    BinOp::Add => Op::Add,
                },
                args,
            },
            (Expr::Not(_), Prepared::Ops(args)) => InstrKind::Assign {
                dst,
                op: Op::Not,
                args,
            },
            _ => unreachable!("operands prepared for a different expression"),
        };
        self.emit(cx, kind);
    }

    /// Operand for `e`, introducing a temporary for compound expressions.
    fn value(&mut self, cx: &mut FnCtx, e: &Expr) -> Operand {
        match e {
            Expr::Var(name, _) => match self.lookup(cx, name) {
                Some(v) => Operand::Var(v),
                None => Operand::Const(Lit::Str(name.clone())),
            },
            Expr::Lit(l) => Operand::Const(l.clone()),
            _ => {
                let pre = self.temp_free_target(cx, e);
                let t = self.temp(cx);
                self.into(cx, e, t.clone(), pre);
                Operand::Var(t)
            }
        }
    }

    /// Like `value`, but always a variable (literals go through a temporary).
    fn var_of(&mut self, cx: &mut FnCtx, e: &Expr) -> String {
        match self.value(cx, e) {
            Operand::Var(v) => v,
            Operand::Const(c) => {
                let t = self.temp(cx);
                self.emit(
                    cx,
                    InstrKind::Const {
                        dst: t.clone(),
                        value: c,
                    },
                );
                t
            }
        }
    }

    fn call_parts(&mut self, cx: &mut FnCtx, e: &Expr) -> (Callee, Vec<Operand>) {
        let Expr::Call {
            recv, name, args, ..
        } = e
        else {
            unreachable!()
        };
        let is_fn = |n: &str| self.prog.function(n).is_some();
        let mut ops = Vec::new();
        let callee = match recv.as_deref() {
            None if is_fn(name) => Callee::Function(name.clone()),
            None => Callee::Builtin(name.clone()),
            Some(Expr::Var(ns, _)) if self.lookup(cx, ns).is_none() => {
                Callee::Builtin(format!("{ns}.{name}"))
            }
            Some(r) => {
                let r = self.value(cx, r);
                if is_fn(name) {
                    Callee::Function(name.clone())
                } else {
                    ops.push(r);
                    if self.prog.builtins.contains(name) {
                        Callee::Builtin(name.clone())
                    } else {
                        self.diagnostics.push(format!(
                            "{}: line {}: unresolved method `{name}`; call treated as opaque",
                            cx.name, cx.line
                        ));
                        Callee::Unresolved(name.clone())
                    }
                }
            }
        };
        for a in args {
            ops.push(self.value(cx, a));
        }
        (callee, ops)
    }

    fn call(&mut self, cx: &mut FnCtx, e: &Expr, dst: Option<String>) {
        let (callee, args) = self.call_parts(cx, e);
        self.emit(cx, InstrKind::Call { dst, callee, args });
    }
}

enum Prepared {
    Ops(Vec<Operand>),
    Call((Callee, Vec<Operand>)),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osl::parse_program;

    fn lower(src: &str) -> IrProgram {
        let builtins = ["db.store", "sendRedirect", "sha256"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        lower_to_ir(&parse_program(src, &builtins).unwrap())
    }

    fn facts(ir: &IrProgram, pred: &str) -> Vec<String> {
        ir.base_facts()
            .into_iter()
            .filter(|a| a.pred == pred)
            .map(|a| a.to_string())
            .collect()
    }

    #[test]
    fn constant_assignment_fact() {
        let ir = lower("fn f(){ let r1 = 0; }");
        assert_eq!(
            facts(&ir, "assign"),
            vec![r#"assign(1, "f::r1", "const:0")"#]
        );
    }

    #[test]
    fn branch_fact_names_arms() {
        let ir = lower("fn f(c){ if (c) { let a = 1; } else { let b = 2; } }");
        assert_eq!(facts(&ir, "branch"), vec![r#"branch(1, "f::c", 2, 3)"#]);
        assert_eq!(ir.instr(Label(2)).succ, vec![Label(4)]);
        assert_eq!(ir.instr(Label(3)).succ, vec![Label(4)]);
        assert!(matches!(
            ir.instr(Label(4)).kind,
            InstrKind::Return { value: None }
        ));
        assert_eq!(ir.instr(Label(2)).control_parent, Some(Label(1)));
        assert_eq!(ir.instr(Label(4)).control_parent, Some(Label(0)));
    }

    #[test]
    fn allocation_site() {
        let ir = lower("fn f(){ let y = new Obj(); }");
        assert_eq!(facts(&ir, "alloc"), vec![r#"alloc(1, "f::y", "o1")"#]);
    }

    #[test]
    fn compound_expressions_use_temporaries() {
        let ir = lower("fn f(a, b){ let x = a.k == b; }");
        let kinds: Vec<&str> = ir.instructions.iter().map(Instruction::kind_name).collect();
        assert_eq!(kinds, vec!["entry", "load", "assign", "return"]);
        assert_eq!(ir.instr(Label(1)).def(), Some("f::%t0"));
        assert_eq!(ir.instr(Label(2)).def(), Some("f::x"));
    }

    #[test]
    fn method_resolution() {
        let ir = lower(
            "fn g(){ return 1; } fn f(o, u){ o.g(); db.store(u); o.sendRedirect(u); o.unknown(); }",
        );
        let callees: Vec<Callee> = ir.calls().map(|(_, c)| c.clone()).collect();
        assert_eq!(
            callees,
            vec![
                Callee::Function("g".into()),
                Callee::Builtin("db.store".into()),
                Callee::Builtin("sendRedirect".into()),
                Callee::Unresolved("unknown".into()),
            ]
        );
        assert_eq!(ir.diagnostics.len(), 1);
        let (recv_call, _) = ir.calls().nth(2).unwrap();
        assert_eq!(recv_call.uses(), vec!["f::o", "f::u"]);
    }

    #[test]
    fn shadowing_gets_distinct_names() {
        let ir = lower("fn f(){ let x = 1; if (x) { let x = 2; let y = x; } }");
        assert_eq!(ir.instr(Label(3)).def(), Some("f::x#2"));
        assert_eq!(ir.instr(Label(4)).uses(), vec!["f::x#2"]);
    }

    #[test]
    fn let_initializer_sees_outer_binding() {
        let ir = lower("fn f(){ let x = 1; if (x) { let x = x + 1; } }");
        assert_eq!(ir.instr(Label(3)).uses(), vec!["f::x"]);
        assert_eq!(ir.instr(Label(3)).def(), Some("f::x#2"));
    }

    #[test]
    fn dead_code_kept() {
        let ir = lower("fn f(){ return; let x = 1; }");
        assert_eq!(ir.instructions.len(), 4);
        assert!(ir.instr(Label(1)).succ.is_empty());
    }

    #[test]
    fn lowering_is_deterministic() {
        let src = "fn f(a){ if (a == null) { return a.b; } let c = sha256(a + \"x\"); return c; }";
        assert_eq!(lower(src), lower(src));
    }
}
