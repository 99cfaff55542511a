use std::collections::{BTreeMap, BTreeSet};

use super::lower::{IrProgram, Label};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: usize,
    pub labels: Vec<Label>,
    pub succs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Cfg {
    /// Basic blocks per function, in source order of their leaders.
    pub blocks: BTreeMap<String, Vec<BasicBlock>>,
    /// Instruction-level successor edges, sorted.
    pub follow: Vec<(Label, Label)>,
    /// Instructions not reachable from their function entry.
    pub unreachable: Vec<Label>,
}

impl Cfg {
    pub fn follows(&self, a: Label, b: Label) -> bool {
        self.follow.binary_search(&(a, b)).is_ok()
    }
}

pub fn build_cfg(ir: &IrProgram) -> Cfg {
    let mut cfg = Cfg::default();
    for f in &ir.functions {
        let mut preds: BTreeMap<Label, usize> = BTreeMap::new();
        for &l in &f.labels {
            for &s in &ir.instr(l).succ {
                *preds.entry(s).or_default() += 1;
                cfg.follow.push((l, s));
            }
        }
        let leader = |l: Label| {
            l == f.entry
                || preds.get(&l).copied().unwrap_or(0) != 1
                || f.labels.iter().any(|&p| {
                    let s = &ir.instr(p).succ;
                    s.len() > 1 && s.contains(&l)
                })
        };
        let leaders: Vec<Label> = f.labels.iter().copied().filter(|&l| leader(l)).collect();
        let block_of: BTreeMap<Label, usize> =
            leaders.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let mut blocks = Vec::new();
        for (id, &start) in leaders.iter().enumerate() {
            let mut labels = vec![start];
            let mut cur = start;
            loop {
                let succ = &ir.instr(cur).succ;
                if succ.len() != 1 || block_of.contains_key(&succ[0]) {
                    break;
                }
                cur = succ[0];
                labels.push(cur);
            }
            let mut succs: Vec<usize> = ir.instr(cur).succ.iter().map(|s| block_of[s]).collect();
            succs.dedup();
            blocks.push(BasicBlock { id, labels, succs });
        }

        let mut seen = BTreeSet::new();
        let mut stack = vec![f.entry];
        while let Some(l) = stack.pop() {
            if seen.insert(l) {
                stack.extend(ir.instr(l).succ.iter().copied());
            }
        }
        cfg.unreachable
            .extend(f.labels.iter().copied().filter(|l| !seen.contains(l)));
        cfg.blocks.insert(f.name.clone(), blocks);
    }
    cfg.follow.sort();
    cfg.follow.dedup();
    cfg
}
