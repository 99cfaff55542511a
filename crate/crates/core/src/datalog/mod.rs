//! A small Datalog engine: ground facts, Horn rules with stratified negation,
//! semi-naive bottom-up evaluation, and conjunctive queries.

mod engine;
mod stratify;
mod syntax;

pub use engine::{
    evaluate, evaluate_with, natural_cmp, query, Binding, EvalOptions, EvalStats, FactDb,
    QueryResult, DEFAULT_MAX_DERIVED,
};
pub use stratify::{stratify, Strata};
pub use syntax::{parse_program, parse_query, Atom, Literal, Program, Rule, Term};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DatalogError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("unsafe rule `{rule}`: variable `{var}` is not bound by a positive body atom")]
    Unsafe { rule: String, var: String },
    #[error("fact `{0}` is not ground")]
    NonGround(String),
    #[error("predicate `{pred}` has arity {expected}, used with {found} arguments")]
    Arity {
        pred: String,
        expected: usize,
        found: usize,
    },
    #[error("rules are not stratifiable: negation inside recursive cycle {cycle:?}")]
    NotStratifiable { cycle: Vec<String> },
    #[error("derived-tuple limit of {limit} exceeded")]
    TooManyTuples { limit: usize },
    #[error("evaluation deadline exceeded")]
    Timeout,
}
