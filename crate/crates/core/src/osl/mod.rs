//! Frontend for OSL, a small JavaScript-like language for modelling
//! authorization-server endpoints.

mod ast;
mod cfg;
mod lexer;
mod lower;

pub use ast::{parse_files, parse_program, BinOp, Expr, FnDecl, LValue, Lit, SourceProgram, Stmt};
pub use cfg::{build_cfg, BasicBlock, Cfg};
pub use lexer::{tokenize, Tok, Token};
pub use lower::{
    const_node, lower_to_ir, Callee, InstrKind, Instruction, IrFunction, IrProgram, Label, Op,
    Operand,
};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OslError {
    #[error("{file}:{pos}: syntax error: {msg}")]
    Syntax { file: String, pos: Pos, msg: String },
    #[error("{file}:{pos}: duplicate function `{name}`")]
    DuplicateFunction {
        file: String,
        pos: Pos,
        name: String,
    },
    #[error("{file}:{pos}: use of undeclared identifier `{name}`")]
    Undeclared {
        file: String,
        pos: Pos,
        name: String,
    },
}
