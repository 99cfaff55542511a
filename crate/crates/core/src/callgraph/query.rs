use std::collections::BTreeSet;
use std::fmt;

use super::automaton::{Automaton, Symbol};
use super::CallgraphError;

/// Endpoint query over call strings (method names).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EndpointQuery {
    Name(String),
    Any,
    Seq(Vec<EndpointQuery>),
    Alt(Vec<EndpointQuery>),
    Star(Box<EndpointQuery>),
}

impl fmt::Display for EndpointQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, items: &[EndpointQuery], sep: &str| {
            write!(f, "(")?;
            for (i, q) in items.iter().enumerate() {
                if i > 0 {
                    write!(f, "{sep}")?;
                }
                write!(f, "{q}")?;
            }
            write!(f, ")")
        };
        match self {
            EndpointQuery::Name(n) => f.write_str(n),
            EndpointQuery::Any => f.write_str("."),
            EndpointQuery::Seq(items) => join(f, items, " -> "),
            EndpointQuery::Alt(items) => join(f, items, " + "),
            EndpointQuery::Star(q) => write!(f, "{q}*"),
        }
    }
}

impl EndpointQuery {
    /// Method-name literals, sorted.
    pub fn literals(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            EndpointQuery::Name(n) => {
                out.insert(n);
            }
            EndpointQuery::Any => {}
            EndpointQuery::Seq(v) | EndpointQuery::Alt(v) => v.iter().for_each(|q| q.collect(out)),
            EndpointQuery::Star(q) => q.collect(out),
        }
    }

    /// Unknown method literals. With `strict`, the first one is an error.
    pub fn validate(
        &self,
        methods: &BTreeSet<String>,
        strict: bool,
    ) -> Result<Vec<String>, CallgraphError> {
        let unknown: Vec<String> = self
            .literals()
            .into_iter()
            .filter(|l| !methods.contains(*l))
            .map(str::to_string)
            .collect();
        match unknown.first() {
            Some(u) if strict => Err(CallgraphError::UnknownMethod(u.clone())),
            _ => Ok(unknown),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum QTok {
    Name(String),
    Dot,
    Arrow,
    Plus,
    Star,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(QTok, usize)>, CallgraphError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let name_char = |c: char| c.is_alphanumeric() || matches!(c, '_' | ':' | '$' | '<' | '>');
    while i < chars.len() {
        let c = chars[i];
        let tok = match c {
            _ if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push((QTok::Arrow, i));
                i += 2;
                continue;
            }
            '.' => QTok::Dot,
            '+' => QTok::Plus,
            '*' => QTok::Star,
            '(' => QTok::LParen,
            ')' => QTok::RParen,
            _ if name_char(c) => {
                let start = i;
                while i < chars.len()
                    && (name_char(chars[i])
                        || (chars[i] == '.' && chars.get(i + 1).is_some_and(|n| name_char(*n))))
                {
                    i += 1;
                }
                out.push((QTok::Name(chars[start..i].iter().collect()), start));
                continue;
            }
            _ => {
                return Err(CallgraphError::QuerySyntax {
                    offset: i,
                    msg: format!("unexpected character {c:?}"),
                })
            }
        };
        out.push((tok, i));
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(QTok, usize)>,
    at: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&QTok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.at).map_or(self.len, |(_, o)| *o)
    }

    fn err(&self, msg: &str) -> CallgraphError {
        CallgraphError::QuerySyntax {
            offset: self.offset(),
            msg: msg.to_string(),
        }
    }

    fn starts_atom(t: Option<&QTok>) -> bool {
        matches!(t, Some(QTok::Name(_) | QTok::Dot | QTok::LParen))
    }

    fn alt(&mut self) -> Result<EndpointQuery, CallgraphError> {
        let mut items = vec![self.seq()?];
        while self.peek() == Some(&QTok::Plus) {
            self.at += 1;
            items.push(self.seq()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            EndpointQuery::Alt(items)
        })
    }

    fn seq(&mut self) -> Result<EndpointQuery, CallgraphError> {
        let mut items = vec![self.postfix()?];
        while self.peek() == Some(&QTok::Arrow) {
            self.at += 1;
            items.push(self.postfix()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            EndpointQuery::Seq(items)
        })
    }

    fn postfix(&mut self) -> Result<EndpointQuery, CallgraphError> {
        let mut q = self.atom()?;
        loop {
            match self.peek() {
                Some(QTok::Star) => {
                    self.at += 1;
                    q = EndpointQuery::Star(Box::new(q));
                }
                // `+` not followed by an operand is the postfix form: Q+ = Q -> Q*
                Some(QTok::Plus)
                    if !Self::starts_atom(self.toks.get(self.at + 1).map(|(t, _)| t)) =>
                {
                    self.at += 1;
                    q = EndpointQuery::Seq(vec![q.clone(), EndpointQuery::Star(Box::new(q))]);
                }
                _ => return Ok(q),
            }
        }
    }

    fn atom(&mut self) -> Result<EndpointQuery, CallgraphError> {
        match self.peek().cloned() {
            Some(QTok::Name(n)) => {
                self.at += 1;
                Ok(EndpointQuery::Name(n))
            }
            Some(QTok::Dot) => {
                self.at += 1;
                Ok(EndpointQuery::Any)
            }
            Some(QTok::LParen) => {
                self.at += 1;
                let q = self.alt()?;
                if self.peek() != Some(&QTok::RParen) {
                    return Err(self.err("expected `)`"));
                }
                self.at += 1;
                Ok(q)
            }
            _ => Err(self.err("expected a method name, `.` or `(`")),
        }
    }
}

pub fn parse_endpoint_query(text: &str) -> Result<EndpointQuery, CallgraphError> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
        len: text.len(),
    };
    let q = p.alt()?;
    if p.at != p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(q)
}

/// Thompson construction: one initial and one accepting state.
pub fn query_to_nfa(q: &EndpointQuery) -> Automaton {
    fn build(a: &mut Automaton, q: &EndpointQuery) -> (usize, usize) {
        match q {
            EndpointQuery::Name(_) | EndpointQuery::Any => {
                let s = a.add_state(format!("q{}", a.state_count()));
                let t = a.add_state(format!("q{}", a.state_count()));
                let sym = match q {
                    EndpointQuery::Name(n) => Symbol::Name(n.clone()),
                    _ => Symbol::Any,
                };
                a.transitions.insert((s, sym, t));
                (s, t)
            }
            EndpointQuery::Seq(items) => {
                let mut frags = items.iter().map(|i| build(a, i)).collect::<Vec<_>>();
                for w in frags.windows(2) {
                    a.transitions.insert((w[0].1, Symbol::Epsilon, w[1].0));
                }
                let first = frags.first_mut().unwrap().0;
                (first, frags.last().unwrap().1)
            }
            EndpointQuery::Alt(items) => {
                let s = a.add_state(format!("q{}", a.state_count()));
                let frags = items.iter().map(|i| build(a, i)).collect::<Vec<_>>();
                let t = a.add_state(format!("q{}", a.state_count()));
                for (fs, ft) in frags {
                    a.transitions.insert((s, Symbol::Epsilon, fs));
                    a.transitions.insert((ft, Symbol::Epsilon, t));
                }
                (s, t)
            }
            EndpointQuery::Star(inner) => {
                let s = a.add_state(format!("q{}", a.state_count()));
                let (is, it) = build(a, inner);
                let t = a.add_state(format!("q{}", a.state_count()));
                a.transitions.insert((s, Symbol::Epsilon, is));
                a.transitions.insert((s, Symbol::Epsilon, t));
                a.transitions.insert((it, Symbol::Epsilon, is));
                a.transitions.insert((it, Symbol::Epsilon, t));
                (s, t)
            }
        }
    }
    let mut a = Automaton::default();
    let (s, t) = build(&mut a, q);
    a.initial.insert(s);
    a.accepting.insert(t);
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn name(n: &str) -> EndpointQuery {
        EndpointQuery::Name(n.into())
    }

    fn any_star() -> EndpointQuery {
        EndpointQuery::Star(Box::new(EndpointQuery::Any))
    }

    #[test]
    fn sequence_with_wildcards() {
        let q = parse_endpoint_query(".* -> A:foo -> .* -> C:bar").unwrap();
        assert_eq!(
            q,
            EndpointQuery::Seq(vec![any_star(), name("A:foo"), any_star(), name("C:bar")])
        );
    }

    #[test]
    fn single_literal() {
        assert_eq!(parse_endpoint_query("f").unwrap(), name("f"));
    }

    #[test]
    fn plus_desugars() {
        assert_eq!(
            parse_endpoint_query("f+").unwrap(),
            parse_endpoint_query("f -> f*").unwrap()
        );
    }

    #[test]
    fn binary_plus_is_alternation() {
        assert_eq!(
            parse_endpoint_query("a + b").unwrap(),
            EndpointQuery::Alt(vec![name("a"), name("b")])
        );
    }

    #[test]
    fn dotted_names() {
        assert_eq!(parse_endpoint_query("db.store").unwrap(), name("db.store"));
    }

    #[test]
    fn syntax_errors() {
        assert!(parse_endpoint_query("").is_err());
        assert!(parse_endpoint_query("a ->").is_err());
        assert!(parse_endpoint_query("(a").is_err());
        assert!(parse_endpoint_query("a # b").is_err());
    }

    #[test]
    fn validation_modes() {
        let q = parse_endpoint_query(".* -> Missing -> f").unwrap();
        let methods: BTreeSet<String> = ["f".to_string()].into();
        assert_eq!(q.validate(&methods, false).unwrap(), vec!["Missing"]);
        assert_eq!(
            q.validate(&methods, true),
            Err(CallgraphError::UnknownMethod("Missing".into()))
        );
    }

    #[test]
    fn literal_nfa_has_two_states() {
        let a = query_to_nfa(&name("f"));
        assert_eq!(a.state_count(), 2);
        assert!(a.accepts(&["f"]));
        assert!(!a.accepts::<&str>(&[]));
        assert!(!a.accepts(&["f", "f"]));
    }

    #[test]
    fn any_star_accepts_everything() {
        let a = query_to_nfa(&parse_endpoint_query(".*").unwrap());
        assert!(a.accepts::<&str>(&[]));
        assert!(a.accepts(&["x", "y", "z"]));
    }

    #[test]
    fn alternation_language() {
        let a = query_to_nfa(&parse_endpoint_query("a + b").unwrap());
        let words: Vec<Vec<&str>> = vec![
            vec![],
            vec!["a"],
            vec!["b"],
            vec!["a", "a"],
            vec!["a", "b"],
            vec!["b", "a"],
            vec!["b", "b"],
        ];
        let accepted: Vec<bool> = words.iter().map(|w| a.accepts(w)).collect();
        assert_eq!(
            accepted,
            vec![false, true, true, false, false, false, false]
        );
    }
}
