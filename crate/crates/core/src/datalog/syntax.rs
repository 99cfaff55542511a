//! Rule and fact syntax.
//!
//! The textual form follows the usual Horn-clause notation:
//!
//! ```text
//! ancestor(X, Y) :- parent(X, Z), ancestor(Z, Y).
//! orphan(X) :- person(X), !parent(_, X).
//! parent("Bill", "Mary").
//! ```
//!
//! Identifiers are variables, double-quoted strings and bare integers are
//! constants, and `_` is a don't-care. Negation is written `!` or `¬`, and
//! `X != Y` is an inequality constraint between bound terms. `//` and `%`
//! start line comments.

use std::collections::BTreeSet;
use std::fmt;

use super::DatalogError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
    Wildcard,
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn constant(value: impl Into<String>) -> Self {
        Term::Const(value.into())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => {
                if !c.is_empty() && c.bytes().all(|b| b.is_ascii_digit()) {
                    write!(f, "{c}")
                } else {
                    write!(f, "\"{}\"", c.replace('\\', "\\\\").replace('"', "\\\""))
                }
            }
            Term::Wildcard => write!(f, "_"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            pred: pred.into(),
            args,
        }
    }

    /// Ground atom from constant strings.
    pub fn fact<S: AsRef<str>>(pred: impl Into<String>, values: &[S]) -> Self {
        Atom {
            pred: pred.into(),
            args: values
                .iter()
                .map(|v| Term::Const(v.as_ref().to_string()))
                .collect(),
        }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| matches!(t, Term::Const(_)))
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::as_var)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pred)?;
        if !self.args.is_empty() {
            write!(f, "(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// One conjunct of a rule body or query.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Literal {
    Pos(Atom),
    Neg(Atom),
    Neq(Term, Term),
}

impl Literal {
    pub fn atom(&self) -> Option<&Atom> {
        match self {
            Literal::Pos(a) | Literal::Neg(a) => Some(a),
            Literal::Neq(..) => None,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Pos(a) => write!(f, "{a}"),
            Literal::Neg(a) => write!(f, "!{a}"),
            Literal::Neq(l, r) => write!(f, "{l} != {r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Literal>,
}

impl Rule {
    pub fn new(head: Atom, body: Vec<Literal>) -> Self {
        Rule { head, body }
    }

    /// Range restriction and negation safety.
    pub fn check_safety(&self) -> Result<(), DatalogError> {
        let positive: BTreeSet<&str> = self
            .body
            .iter()
            .filter_map(|l| match l {
                Literal::Pos(a) => Some(a.vars()),
                _ => None,
            })
            .flatten()
            .collect();
        let unsafe_var = |v: &str| DatalogError::Unsafe {
            rule: self.to_string(),
            var: v.to_string(),
        };
        for v in self.head.vars() {
            if !positive.contains(v) {
                return Err(unsafe_var(v));
            }
        }
        if self.head.args.iter().any(|t| matches!(t, Term::Wildcard)) {
            return Err(unsafe_var("_"));
        }
        for lit in &self.body {
            match lit {
                Literal::Neg(a) => {
                    if let Some(v) = a.vars().find(|v| !positive.contains(v)) {
                        return Err(unsafe_var(v));
                    }
                }
                Literal::Neq(l, r) => {
                    for t in [l, r] {
                        match t {
                            Term::Var(v) if !positive.contains(v.as_str()) => {
                                return Err(unsafe_var(v))
                            }
                            Term::Wildcard => return Err(unsafe_var("_")),
                            _ => {}
                        }
                    }
                }
                Literal::Pos(_) => {}
            }
        }
        Ok(())
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            write!(f, " :- ")?;
            for (i, l) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{l}")?;
            }
        }
        write!(f, ".")
    }
}

/// A parsed program: ground facts and rules, in source order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub facts: Vec<Atom>,
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(String),
    Underscore,
    LParen,
    RParen,
    Comma,
    Dot,
    Implies,
    Not,
    Neq,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.char_indices().peekable(),
            src,
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn err(&self, msg: impl Into<String>) -> DatalogError {
        DatalogError::Syntax {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize, usize)>, DatalogError> {
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
                continue;
            }
            let (line, col) = (self.line, self.col);
            let start = self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len());
            if c == '%' || (c == '/' && self.src[start..].starts_with("//")) {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
                continue;
            }
            let tok = match c {
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                '.' => {
                    self.bump();
                    Tok::Dot
                }
                '¬' => {
                    self.bump();
                    Tok::Not
                }
                '!' => {
                    self.bump();
                    if self.peek() == Some('=') {
                        self.bump();
                        Tok::Neq
                    } else {
                        Tok::Not
                    }
                }
                ':' => {
                    self.bump();
                    if self.peek() != Some('-') {
                        return Err(self.err("expected `:-`"));
                    }
                    self.bump();
                    Tok::Implies
                }
                '"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            None => return Err(self.err("unterminated string")),
                            Some('"') => break,
                            Some('\\') => match self.bump() {
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                Some(other) => s.push(other),
                                None => return Err(self.err("unterminated string")),
                            },
                            Some(other) => s.push(other),
                        }
                    }
                    Tok::Str(s)
                }
                c if c.is_ascii_digit() => {
                    let mut s = String::new();
                    while let Some(d) = self.peek().filter(|d| d.is_ascii_digit()) {
                        s.push(d);
                        self.bump();
                    }
                    Tok::Num(s)
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut s = String::new();
                    while let Some(d) = self.peek().filter(|d| d.is_alphanumeric() || *d == '_') {
                        s.push(d);
                        self.bump();
                    }
                    if s == "_" {
                        Tok::Underscore
                    } else {
                        Tok::Ident(s)
                    }
                }
                other => return Err(self.err(format!("unexpected character `{other}`"))),
            };
            out.push((tok, line, col));
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn err(&self, msg: impl Into<String>) -> DatalogError {
        let (line, col) = self
            .toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|t| (t.1, t.2))
            .unwrap_or((1, 1));
        DatalogError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), DatalogError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn term(&mut self) -> Result<Term, DatalogError> {
        let t = match self.peek() {
            Some(Tok::Ident(s)) => Term::Var(s.clone()),
            Some(Tok::Str(s)) => Term::Const(s.clone()),
            Some(Tok::Num(s)) => Term::Const(s.clone()),
            Some(Tok::Underscore) => Term::Wildcard,
            _ => return Err(self.err("expected a term")),
        };
        self.pos += 1;
        Ok(t)
    }

    fn atom(&mut self) -> Result<Atom, DatalogError> {
        let pred = match self.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => return Err(self.err("expected a predicate name")),
        };
        self.pos += 1;
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            if self.peek() != Some(&Tok::RParen) {
                loop {
                    args.push(self.term()?);
                    if self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        Ok(Atom { pred, args })
    }

    fn literal(&mut self) -> Result<Literal, DatalogError> {
        if self.peek() == Some(&Tok::Not) {
            self.pos += 1;
            return Ok(Literal::Neg(self.atom()?));
        }
        // `X != Y` vs. an atom: look one token past the first term.
        if matches!(self.toks.get(self.pos + 1).map(|t| &t.0), Some(Tok::Neq)) {
            let l = self.term()?;
            self.pos += 1;
            let r = self.term()?;
            return Ok(Literal::Neq(l, r));
        }
        Ok(Literal::Pos(self.atom()?))
    }

    fn program(&mut self) -> Result<Program, DatalogError> {
        let mut prog = Program::default();
        while self.peek().is_some() {
            let head = self.atom()?;
            if self.peek() == Some(&Tok::Implies) {
                self.pos += 1;
                let mut body = vec![self.literal()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    // tolerate a trailing comma before the final dot
                    if self.peek() == Some(&Tok::Dot) {
                        break;
                    }
                    body.push(self.literal()?);
                }
                self.expect(Tok::Dot, "`.` at end of rule")?;
                let rule = Rule { head, body };
                rule.check_safety()?;
                prog.rules.push(rule);
            } else {
                self.expect(Tok::Dot, "`.` or `:-`")?;
                if !head.is_ground() {
                    return Err(DatalogError::NonGround(head.to_string()));
                }
                prog.facts.push(head);
            }
        }
        Ok(prog)
    }
}

/// Parse a program of facts and rules.
pub fn parse_program(src: &str) -> Result<Program, DatalogError> {
    let toks = Lexer::new(src).tokens()?;
    Parser { toks, pos: 0 }.program()
}

/// Parse a comma-separated conjunctive query body, with or without a trailing dot.
pub fn parse_query(src: &str) -> Result<Vec<Literal>, DatalogError> {
    let toks = Lexer::new(src).tokens()?;
    let mut p = Parser { toks, pos: 0 };
    let mut body = vec![p.literal()?];
    while p.peek() == Some(&Tok::Comma) {
        p.pos += 1;
        body.push(p.literal()?);
    }
    if p.peek() == Some(&Tok::Dot) {
        p.pos += 1;
    }
    if p.peek().is_some() {
        return Err(p.err("trailing input after query"));
    }
    Ok(body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_recursive_rule() {
        let p = parse_program("ancestor(x, y) :- parent(x, z), ancestor(z, y).").unwrap();
        assert_eq!(p.rules.len(), 1);
        assert_eq!(
            p.rules[0].to_string(),
            "ancestor(x, y) :- parent(x, z), ancestor(z, y)."
        );
    }

    #[test]
    fn parses_facts_negation_and_dont_care() {
        let src = r#"
            parent("Bill", "Mary"). // a fact
            % another comment style
            orphan(X) :- person(X), ¬parent(_, X).
            lonely(X) :- person(X), !friend(X, _), X != "Bill".
        "#;
        let p = parse_program(src).unwrap();
        assert_eq!(p.facts, vec![Atom::fact("parent", &["Bill", "Mary"])]);
        assert_eq!(p.rules.len(), 2);
        assert!(matches!(p.rules[0].body[1], Literal::Neg(_)));
        assert!(matches!(p.rules[1].body[2], Literal::Neq(..)));
    }

    #[test]
    fn zero_arity_head() {
        let p = parse_program("P1 :- OAuthTag(L1, \"auth_req\").").unwrap();
        assert!(p.rules[0].head.args.is_empty());
        assert_eq!(p.rules[0].to_string(), "P1 :- OAuthTag(L1, \"auth_req\").");
    }

    #[test]
    fn rejects_unsafe_rules() {
        assert!(matches!(
            parse_program("p(X) :- q(Y)."),
            Err(DatalogError::Unsafe { .. })
        ));
        assert!(matches!(
            parse_program("p(X) :- q(X), !r(Y)."),
            Err(DatalogError::Unsafe { .. })
        ));
        assert!(matches!(
            parse_program("p(X)."),
            Err(DatalogError::NonGround(_))
        ));
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_program("p(X) :- q(X)\nr(Y).") {
            Err(DatalogError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn query_body() {
        let q = parse_query("ancestor(x, \"J\")").unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q[0].to_string(), "ancestor(x, \"J\")");
    }
}
