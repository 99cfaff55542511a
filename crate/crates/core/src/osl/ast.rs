use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::lexer::{tokenize, Tok, Token};
use super::{OslError, Pos};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Lit {
    Str(String),
    Num(String),
    Null,
    Bool(bool),
}

impl std::fmt::Display for Lit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lit::Str(s) => write!(f, "{s:?}"),
            Lit::Num(n) => f.write_str(n),
            Lit::Null => f.write_str("null"),
            Lit::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Eq,
    Ne,
    And,
    Or,
    Add,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Var(String, Pos),
    Lit(Lit),
    Field(Box<Expr>, String),
    /// `name(args)` or `recv.name(args)`.
    Call {
        recv: Option<Box<Expr>>,
        name: String,
        args: Vec<Expr>,
        pos: Pos,
    },
    New(String, Vec<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LValue {
    Var(String, Pos),
    Field(Expr, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Let(String, Expr, Pos),
    Assign(LValue, Expr, Pos),
    If(Expr, Vec<Stmt>, Option<Vec<Stmt>>, Pos),
    Return(Option<Expr>, Pos),
    Expr(Expr, Pos),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FnDecl {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub file: String,
    pub pos: Pos,
}

/// A parsed and name-checked OSL program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceProgram {
    pub files: Vec<String>,
    pub functions: Vec<FnDecl>,
    pub builtins: BTreeSet<String>,
}

impl SourceProgram {
    pub fn function(&self, name: &str) -> Option<&FnDecl> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn statement_count(&self) -> usize {
        fn count(stmts: &[Stmt]) -> usize {
            stmts
                .iter()
                .map(|s| match s {
                    Stmt::If(_, t, e, _) => 1 + count(t) + e.as_deref().map_or(0, count),
                    _ => 1,
                })
                .sum()
        }
        self.functions.iter().map(|f| count(&f.body)).sum()
    }
}

struct Parser<'a> {
    file: &'a str,
    toks: Vec<Token>,
    at: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error(&self, msg: String) -> OslError {
        OslError::Syntax {
            file: self.file.to_string(),
            pos: self.pos(),
            msg,
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Pos, OslError> {
        if *self.peek() == tok {
            Ok(self.bump().pos)
        } else {
            Err(self.error(format!(
                "expected {}, found {}",
                tok.describe(),
                self.peek().describe()
            )))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), OslError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let p = self.bump().pos;
                Ok((s, p))
            }
            t => Err(self.error(format!("expected identifier, found {}", t.describe()))),
        }
    }

    fn program(&mut self) -> Result<Vec<FnDecl>, OslError> {
        let mut fns = Vec::new();
        while *self.peek() != Tok::Eof {
            fns.push(self.function()?);
        }
        Ok(fns)
    }

    fn function(&mut self) -> Result<FnDecl, OslError> {
        let pos = self.expect(Tok::Fn)?;
        let (name, _) = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                params.push(self.ident()?.0);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        let body = self.block()?;
        Ok(FnDecl {
            name,
            params,
            body,
            file: self.file.to_string(),
            pos,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, OslError> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.error("unclosed block".into()));
            }
            out.push(self.stmt()?);
        }
        self.bump();
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, OslError> {
        let pos = self.pos();
        match self.peek() {
            Tok::Let => {
                self.bump();
                let (name, _) = self.ident()?;
                self.expect(Tok::Assign)?;
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::Let(name, e, pos))
            }
            Tok::If => {
                self.bump();
                self.expect(Tok::LParen)?;
                let c = self.expr()?;
                self.expect(Tok::RParen)?;
                let then = self.block()?;
                let els = if *self.peek() == Tok::Else {
                    self.bump();
                    Some(self.block()?)
                } else {
                    None
                };
                Ok(Stmt::If(c, then, els, pos))
            }
            Tok::Return => {
                self.bump();
                let value = if *self.peek() == Tok::Semi {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(Tok::Semi)?;
                Ok(Stmt::Return(value, pos))
            }
            _ => {
                let e = self.expr()?;
                if *self.peek() == Tok::Assign {
                    self.bump();
                    let target = match e {
                        Expr::Var(n, p) => LValue::Var(n, p),
                        Expr::Field(b, f) => LValue::Field(*b, f),
                        _ => {
                            return Err(OslError::Syntax {
                                file: self.file.to_string(),
                                pos,
                                msg: "invalid assignment target".into(),
                            })
                        }
                    };
                    let v = self.expr()?;
                    self.expect(Tok::Semi)?;
                    Ok(Stmt::Assign(target, v, pos))
                } else {
                    self.expect(Tok::Semi)?;
                    Ok(Stmt::Expr(e, pos))
                }
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, OslError> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> Result<Expr, OslError> {
        const LEVELS: [&[(Tok, BinOp)]; 4] = [
            &[(Tok::OrOr, BinOp::Or)],
            &[(Tok::AndAnd, BinOp::And)],
            &[(Tok::EqEq, BinOp::Eq), (Tok::NotEq, BinOp::Ne)],
            &[(Tok::Plus, BinOp::Add)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let Some((_, op)) = LEVELS[level].iter().find(|(t, _)| t == self.peek()) else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Binary(*op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, OslError> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.postfix()
    }

    fn args(&mut self) -> Result<Vec<Expr>, OslError> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.expr()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn postfix(&mut self) -> Result<Expr, OslError> {
        let mut e = self.primary()?;
        loop {
            match self.peek() {
                Tok::Dot => {
                    self.bump();
                    let (field, pos) = self.ident()?;
                    if *self.peek() == Tok::LParen {
                        let args = self.args()?;
                        e = Expr::Call {
                            recv: Some(Box::new(e)),
                            name: field,
                            args,
                            pos,
                        };
                    } else {
                        e = Expr::Field(Box::new(e), field);
                    }
                }
                Tok::LParen => match e {
                    Expr::Var(name, pos) => {
                        let args = self.args()?;
                        e = Expr::Call {
                            recv: None,
                            name,
                            args,
                            pos,
                        };
                    }
                    _ => return Err(self.error("only named functions can be called".into())),
                },
                _ => return Ok(e),
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, OslError> {
        let t = self.peek().clone();
        let e = match t {
            Tok::Ident(name) => {
                let pos = self.bump().pos;
                Expr::Var(name, pos)
            }
            Tok::Str(s) => {
                self.bump();
                Expr::Lit(Lit::Str(s))
            }
            Tok::Num(n) => {
                self.bump();
                Expr::Lit(Lit::Num(n))
            }
            Tok::Null => {
                self.bump();
                Expr::Lit(Lit::Null)
            }
            Tok::True | Tok::False => {
                self.bump();
                Expr::Lit(Lit::Bool(t == Tok::True))
            }
            Tok::New => {
                self.bump();
                let (class, _) = self.ident()?;
                let args = self.args()?;
                Expr::New(class, args)
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                e
            }
            other => {
                return Err(self.error(format!("expected expression, found {}", other.describe())))
            }
        };
        Ok(e)
    }
}

/// Parse a single source text.
pub fn parse_program(source: &str, builtins: &BTreeSet<String>) -> Result<SourceProgram, OslError> {
    parse_files(&[("<input>".to_string(), source.to_string())], builtins)
}

/// Parse several files into one program; function names are global.
pub fn parse_files(
    files: &[(String, String)],
    builtins: &BTreeSet<String>,
) -> Result<SourceProgram, OslError> {
    let mut functions = Vec::new();
    for (path, text) in files {
        let toks = tokenize(path, text)?;
        let mut p = Parser {
            file: path,
            toks,
            at: 0,
        };
        functions.extend(p.program()?);
    }
    let mut seen: BTreeMap<&str, &FnDecl> = BTreeMap::new();
    for f in &functions {
        if seen.insert(&f.name, f).is_some() {
            return Err(OslError::DuplicateFunction {
                file: f.file.clone(),
                pos: f.pos,
                name: f.name.clone(),
            });
        }
    }
    let names: HashSet<&str> = functions.iter().map(|f| f.name.as_str()).collect();
    for f in &functions {
        let mut r = Resolver {
            file: &f.file,
            functions: &names,
            builtins,
            scopes: vec![f.params.iter().cloned().collect()],
        };
        r.block(&f.body)?;
    }
    Ok(SourceProgram {
        files: files.iter().map(|(p, _)| p.clone()).collect(),
        functions,
        builtins: builtins.clone(),
    })
}

struct Resolver<'a> {
    file: &'a str,
    functions: &'a HashSet<&'a str>,
    builtins: &'a BTreeSet<String>,
    scopes: Vec<HashSet<String>>,
}

impl Resolver<'_> {
    fn is_local(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.contains(name))
    }

    fn undeclared(&self, name: &str, pos: Pos) -> OslError {
        OslError::Undeclared {
            file: self.file.to_string(),
            pos,
            name: name.to_string(),
        }
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), OslError> {
        self.scopes.push(HashSet::new());
        for s in stmts {
            self.stmt(s)?;
        }
        self.scopes.pop();
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), OslError> {
        match s {
            Stmt::Let(name, e, _) => {
                self.expr(e)?;
                self.scopes.last_mut().unwrap().insert(name.clone());
            }
            Stmt::Assign(target, e, _) => {
                match target {
                    LValue::Var(name, pos) => {
                        if !self.is_local(name) {
                            return Err(self.undeclared(name, *pos));
                        }
                    }
                    LValue::Field(base, _) => self.expr(base)?,
                }
                self.expr(e)?;
            }
            Stmt::If(c, t, e, _) => {
                self.expr(c)?;
                self.block(t)?;
                if let Some(e) = e {
                    self.block(e)?;
                }
            }
            Stmt::Return(e, _) => {
                if let Some(e) = e {
                    self.expr(e)?;
                }
            }
            Stmt::Expr(e, _) => self.expr(e)?,
        }
        Ok(())
    }

    fn expr(&mut self, e: &Expr) -> Result<(), OslError> {
        match e {
            Expr::Var(name, pos) => {
                if !(self.is_local(name)
                    || self.functions.contains(name.as_str())
                    || self.builtins.contains(name))
                {
                    return Err(self.undeclared(name, *pos));
                }
            }
            Expr::Lit(_) => {}
            Expr::Field(b, _) => self.expr(b)?,
            Expr::Call {
                recv,
                name,
                args,
                pos,
            } => {
                match recv.as_deref() {
                    None => {
                        if !self.functions.contains(name.as_str()) && !self.builtins.contains(name)
                        {
                            return Err(self.undeclared(name, *pos));
                        }
                    }
                    Some(Expr::Var(ns, npos)) if !self.is_local(ns) => {
                        if !self.builtins.contains(&format!("{ns}.{name}")) {
                            return Err(self.undeclared(ns, *npos));
                        }
                    }
                    Some(r) => self.expr(r)?,
                }
                for a in args {
                    self.expr(a)?;
                }
            }
            Expr::New(_, args) => {
                for a in args {
                    self.expr(a)?;
                }
            }
            Expr::Binary(_, l, r) => {
                self.expr(l)?;
                self.expr(r)?;
            }
            Expr::Not(x) => self.expr(x)?,
        }
        Ok(())
    }
}
