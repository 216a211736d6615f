//! Recursive-descent parser for `.tccp` source text.
//!
//! Precedence, loosest first: `||`, then `+` between `ask` branches, then the
//! prefix agents. The branches of `now` are full agents; the `else` branch
//! extends as far right as possible. See `docs/grammar.md`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::ast::{Agent, Arg, Branch, Constraint, Declaration, LinExpr, Program, Rational, RelOp, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },
    #[error("{line}:{col}: call to {name}/{found} but {name} is declared with arity {expected}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: call to unknown procedure {name}/{arity}")]
    UnknownProcedure {
        name: String,
        arity: usize,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: variable {var} is not a parameter of {procedure} nor bound by an enclosing exists")]
    UnboundVariable {
        var: String,
        procedure: String,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: procedure {name} is declared more than once")]
    DuplicateDeclaration { name: String, line: usize, col: usize },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax { line, col, .. }
            | ParseError::Arity { line, col, .. }
            | ParseError::UnknownProcedure { line, col, .. }
            | ParseError::UnboundVariable { line, col, .. }
            | ParseError::DuplicateDeclaration { line, col, .. } => (*line, *col),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Atom(String),
    Var(String),
    Anon,
    Int(BigInt),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Bar,
    Comma,
    Dot,
    Neck,
    Arrow,
    Par,
    Plus,
    Minus,
    Star,
    Slash,
    Rel(RelOp),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Atom(a) => format!("`{}`", a),
            Tok::Var(v) => format!("variable `{}`", v),
            Tok::Anon => "`_`".into(),
            Tok::Int(n) => format!("number `{}`", n),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrack => "`[`".into(),
            Tok::RBrack => "`]`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Neck => "`:-`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Par => "`||`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Rel(op) => format!("`{}`", op.symbol()),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let bump = |i: &mut usize, col: &mut usize, n: usize| {
        *i += n;
        *col += n;
    };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            bump(&mut i, &mut col, 1);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let next = chars.get(i + 1).copied();
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            while i < chars.len() && chars[i] == '\'' {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            if word == "_" {
                Tok::Anon
            } else if c.is_ascii_lowercase() {
                Tok::Atom(word)
            } else {
                Tok::Var(word)
            }
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            col += i - start;
            Tok::Int(digits.parse().expect("digits"))
        } else {
            let (tok, n) = match (c, next) {
                (':', Some('-')) => (Tok::Neck, 2),
                ('-', Some('>')) => (Tok::Arrow, 2),
                ('|', Some('|')) => (Tok::Par, 2),
                ('<', Some('=')) => (Tok::Rel(RelOp::Le), 2),
                ('>', Some('=')) => (Tok::Rel(RelOp::Ge), 2),
                ('=', Some('<')) => (Tok::Rel(RelOp::Le), 2),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('[', _) => (Tok::LBrack, 1),
                (']', _) => (Tok::RBrack, 1),
                ('|', _) => (Tok::Bar, 1),
                (',', _) => (Tok::Comma, 1),
                ('.', _) => (Tok::Dot, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('*', _) => (Tok::Star, 1),
                ('/', _) => (Tok::Slash, 1),
                ('=', _) => (Tok::Rel(RelOp::Eq), 1),
                ('<', _) => (Tok::Rel(RelOp::Lt), 1),
                ('>', _) => (Tok::Rel(RelOp::Gt), 1),
                _ => {
                    return Err(ParseError::Syntax {
                        line,
                        col,
                        expected: "a token".into(),
                        found: format!("`{}`", c),
                    })
                }
            };
            bump(&mut i, &mut col, n);
            tok
        };
        out.push(Spanned {
            tok,
            line: start_line,
            col: start_col,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

const KEYWORDS: &[&str] = &["skip", "tell", "ask", "now", "then", "else", "exists", "true"];

/// Position of a call site, kept for the post-parse checks.
#[derive(Debug, Clone)]
struct CallSite {
    name: String,
    arity: usize,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
struct VarSite {
    name: String,
    line: usize,
    col: usize,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    calls: Vec<CallSite>,
    // variables seen in the current declaration together with the exists
    // binders in force at that point
    scope: Vec<String>,
    unbound: Vec<VarSite>,
    track_scope: bool,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(text: &str) -> PResult<Self> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            calls: Vec::new(),
            scope: Vec::new(),
            unbound: Vec::new(),
            track_scope: false,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.col)
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        let (line, col) = self.here();
        Err(ParseError::Syntax {
            line,
            col,
            expected: expected.to_string(),
            found: self.peek().describe(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            self.error(what)
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Atom(a) if a == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.advance();
            Ok(())
        } else {
            self.error(&format!("`{}`", kw))
        }
    }

    fn note_var(&mut self, name: &str, line: usize, col: usize) {
        if self.track_scope && !self.scope.iter().any(|v| v == name) {
            self.unbound.push(VarSite {
                name: name.to_string(),
                line,
                col,
            });
        }
    }

    fn var(&mut self) -> PResult<String> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Var(v) => {
                self.advance();
                self.note_var(&v, line, col);
                Ok(v)
            }
            _ => self.error("a variable"),
        }
    }

    // -- agents ------------------------------------------------------------

    fn agent(&mut self) -> PResult<Agent> {
        let left = self.choice_agent()?;
        if *self.peek() == Tok::Par {
            self.advance();
            let right = self.agent()?;
            Ok(Agent::par(left, right))
        } else {
            Ok(left)
        }
    }

    fn choice_agent(&mut self) -> PResult<Agent> {
        if !self.is_kw("ask") {
            return self.prefix();
        }
        let mut branches = vec![self.branch()?];
        while *self.peek() == Tok::Plus {
            self.advance();
            if !self.is_kw("ask") {
                return self.error("`ask` to start the next choice branch");
            }
            branches.push(self.branch()?);
        }
        Ok(Agent::Choice(branches))
    }

    fn branch(&mut self) -> PResult<Branch> {
        self.expect_kw("ask")?;
        self.expect(Tok::LParen, "`(` after `ask`")?;
        let guard = self.constraint()?;
        self.expect(Tok::RParen, "`)` closing the guard")?;
        self.expect(Tok::Arrow, "`->` after the guard")?;
        let body = self.prefix()?;
        Ok(Branch { guard, body })
    }

    fn prefix(&mut self) -> PResult<Agent> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::LParen => {
                self.advance();
                let a = self.agent()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(a)
            }
            Tok::Atom(kw) => match kw.as_str() {
                "skip" => {
                    self.advance();
                    Ok(Agent::Skip)
                }
                "tell" => {
                    self.advance();
                    self.expect(Tok::LParen, "`(` after `tell`")?;
                    let c = self.constraint()?;
                    self.expect(Tok::RParen, "`)` closing `tell`")?;
                    Ok(Agent::Tell(c))
                }
                "ask" => {
                    let b = self.branch()?;
                    Ok(Agent::Choice(vec![b]))
                }
                "now" => {
                    self.advance();
                    let cond = if *self.peek() == Tok::LParen {
                        self.advance();
                        let c = self.constraint()?;
                        self.expect(Tok::RParen, "`)` closing the condition")?;
                        c
                    } else {
                        self.constraint()?
                    };
                    self.expect_kw("then")?;
                    let then = self.agent()?;
                    let otherwise = if self.is_kw("else") {
                        self.advance();
                        self.agent()?
                    } else {
                        Agent::Skip
                    };
                    Ok(Agent::now(cond, then, otherwise))
                }
                "exists" => {
                    self.advance();
                    let mut vars = Vec::new();
                    loop {
                        match self.peek().clone() {
                            Tok::Var(v) => {
                                self.advance();
                                vars.push(v);
                            }
                            _ => return self.error("a variable to bind"),
                        }
                        if *self.peek() == Tok::Comma {
                            self.advance();
                        } else {
                            break;
                        }
                    }
                    self.expect(Tok::LParen, "`(` opening the exists body")?;
                    let mark = self.scope.len();
                    self.scope.extend(vars.iter().cloned());
                    let body = self.agent();
                    self.scope.truncate(mark);
                    let body = body?;
                    self.expect(Tok::RParen, "`)` closing the exists body")?;
                    Ok(Agent::Exists(vars, Box::new(body)))
                }
                k if KEYWORDS.contains(&k) => self.error("an agent"),
                _ => {
                    self.advance();
                    let mut args = Vec::new();
                    if *self.peek() == Tok::LParen {
                        self.advance();
                        loop {
                            args.push(self.arg()?);
                            if *self.peek() == Tok::Comma {
                                self.advance();
                            } else {
                                break;
                            }
                        }
                        self.expect(Tok::RParen, "`)` closing the argument list")?;
                    }
                    self.calls.push(CallSite {
                        name: kw.clone(),
                        arity: args.len(),
                        line,
                        col,
                    });
                    Ok(Agent::Call(kw, args))
                }
            },
            _ => self.error("an agent"),
        }
    }

    fn arg(&mut self) -> PResult<Arg> {
        match self.peek() {
            Tok::LBrack | Tok::Anon | Tok::Atom(_) => Ok(Arg::Term(self.term()?)),
            _ => {
                let e = self.linexpr()?;
                if let Some(v) = e.as_single_var() {
                    Ok(Arg::Term(Term::Var(v.to_string())))
                } else if e.is_constant() {
                    Ok(Arg::Term(Term::Num(e.constant)))
                } else {
                    Ok(Arg::Expr(e))
                }
            }
        }
    }

    // -- constraints -------------------------------------------------------

    fn constraint(&mut self) -> PResult<Constraint> {
        if self.is_kw("true") {
            self.advance();
            return Ok(Constraint::True);
        }
        if let (Tok::Var(_), Tok::Rel(RelOp::Eq)) = (self.peek(), self.peek_at(1)) {
            let stream = match self.peek_at(2) {
                Tok::LBrack | Tok::Anon | Tok::Atom(_) => true,
                Tok::Var(_) => !matches!(self.peek_at(3), Tok::Plus | Tok::Minus | Tok::Star),
                _ => false,
            };
            if stream {
                let v = self.var()?;
                self.advance();
                let t = self.term()?;
                return Ok(Constraint::StreamEq(v, t));
            }
        }
        let lhs = self.linexpr()?;
        let op = match self.peek() {
            Tok::Rel(op) => *op,
            _ => return self.error("a comparison operator"),
        };
        self.advance();
        let rhs = self.linexpr()?;
        Ok(Constraint::Linear(lhs, op, rhs))
    }

    fn term(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Atom(a) => {
                self.advance();
                Ok(Term::Atom(a))
            }
            Tok::Var(_) => Ok(Term::Var(self.var()?)),
            Tok::Anon => {
                self.advance();
                Ok(Term::Anon)
            }
            Tok::Int(_) | Tok::Minus => {
                let neg = *self.peek() == Tok::Minus;
                if neg {
                    self.advance();
                }
                let q = self.number()?;
                Ok(Term::Num(if neg { -q } else { q }))
            }
            Tok::LBrack => {
                self.advance();
                let head = self.term()?;
                self.expect(Tok::Bar, "`|` between head and tail")?;
                let tail = self.term()?;
                self.expect(Tok::RBrack, "`]`")?;
                Ok(Term::cons(head, tail))
            }
            _ => self.error("a term"),
        }
    }

    fn number(&mut self) -> PResult<Rational> {
        let n = match self.peek().clone() {
            Tok::Int(n) => n,
            _ => return self.error("a number"),
        };
        self.advance();
        if *self.peek() == Tok::Slash {
            self.advance();
            let d = match self.peek().clone() {
                Tok::Int(d) if !d.is_zero() => d,
                _ => return self.error("a non-zero denominator"),
            };
            self.advance();
            Ok(Rational::new(n, d))
        } else {
            Ok(Rational::from_integer(n))
        }
    }

    fn linexpr(&mut self) -> PResult<LinExpr> {
        let mut sign = Rational::one();
        if *self.peek() == Tok::Minus {
            self.advance();
            sign = -sign;
        }
        let mut e = self.lterm()?.scale(&sign);
        loop {
            let s = match self.peek() {
                Tok::Plus => Rational::one(),
                Tok::Minus => -Rational::one(),
                _ => break,
            };
            self.advance();
            let t = self.lterm()?;
            e = e.plus(&t.scale(&s));
        }
        Ok(e)
    }

    fn lterm(&mut self) -> PResult<LinExpr> {
        match self.peek().clone() {
            Tok::Var(_) => {
                let v = self.var()?;
                let mut e = LinExpr::var(&v);
                if *self.peek() == Tok::Star {
                    self.advance();
                    let k = self.number()?;
                    e = e.scale(&k);
                }
                Ok(e)
            }
            Tok::Int(_) => {
                let k = self.number()?;
                if *self.peek() != Tok::Star {
                    return Ok(LinExpr::constant(k));
                }
                self.advance();
                match self.peek().clone() {
                    Tok::Var(_) => {
                        let v = self.var()?;
                        Ok(LinExpr::var(&v).scale(&k))
                    }
                    Tok::LParen => {
                        self.advance();
                        let inner = self.linexpr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(inner.scale(&k))
                    }
                    _ => self.error("a variable or `(` after `*`"),
                }
            }
            _ => self.error("a variable or a number"),
        }
    }

    fn declaration(&mut self) -> PResult<(String, Declaration, (usize, usize))> {
        let at = self.here();
        let name = match self.peek().clone() {
            Tok::Atom(a) if !KEYWORDS.contains(&a.as_str()) => a,
            _ => return self.error("a procedure name"),
        };
        self.advance();
        let mut formals = Vec::new();
        if *self.peek() == Tok::LParen {
            self.advance();
            loop {
                match self.peek().clone() {
                    Tok::Var(v) => {
                        self.advance();
                        formals.push(v);
                    }
                    _ => return self.error("a formal parameter"),
                }
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
            self.expect(Tok::RParen, "`)` closing the parameter list")?;
        }
        self.expect(Tok::Neck, "`:-`")?;
        self.scope = formals.clone();
        self.unbound.clear();
        self.track_scope = true;
        let body = self.agent();
        self.track_scope = false;
        let body = body?;
        self.expect(Tok::Dot, "`.` terminating the declaration")?;
        if let Some(site) = self.unbound.first() {
            return Err(ParseError::UnboundVariable {
                var: site.name.clone(),
                procedure: name,
                line: site.line,
                col: site.col,
            });
        }
        Ok((name, Declaration { formals, body }, at))
    }
}

fn check_calls(calls: &[CallSite], decls: &BTreeMap<String, Declaration>) -> PResult<()> {
    for c in calls {
        match decls.get(&c.name) {
            None => {
                return Err(ParseError::UnknownProcedure {
                    name: c.name.clone(),
                    arity: c.arity,
                    line: c.line,
                    col: c.col,
                })
            }
            Some(d) if d.formals.len() != c.arity => {
                return Err(ParseError::Arity {
                    name: c.name.clone(),
                    expected: d.formals.len(),
                    found: c.arity,
                    line: c.line,
                    col: c.col,
                })
            }
            _ => {}
        }
    }
    Ok(())
}

/// Parses a sequence of declarations. The entry agent is `skip`; attach the
/// real one with [`with_entry`].
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(text)?;
    let mut decls = BTreeMap::new();
    while *p.peek() != Tok::Eof {
        let (name, decl, (line, col)) = p.declaration()?;
        if decls.contains_key(&name) {
            return Err(ParseError::DuplicateDeclaration { name, line, col });
        }
        decls.insert(name, decl);
    }
    check_calls(&p.calls, &decls)?;
    Ok(Program {
        decls,
        entry: Agent::Skip,
    })
}

/// Parses an entry agent and checks its calls against `program`.
pub fn with_entry(program: Program, entry: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(entry)?;
    let agent = p.agent()?;
    if *p.peek() != Tok::Eof {
        return p.error("end of the entry agent");
    }
    check_calls(&p.calls, &program.decls)?;
    Ok(Program {
        entry: agent,
        ..program
    })
}

/// Parses a standalone agent. Calls are not resolved.
pub fn parse_agent(text: &str) -> Result<Agent, ParseError> {
    let mut p = Parser::new(text)?;
    let a = p.agent()?;
    if *p.peek() != Tok::Eof {
        return p.error("end of input");
    }
    Ok(a)
}

pub fn parse_constraint(text: &str) -> Result<Constraint, ParseError> {
    let mut p = Parser::new(text)?;
    let c = p.constraint()?;
    if *p.peek() != Tok::Eof {
        return p.error("end of input");
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::FromPrimitive;

    fn q(n: i64) -> Rational {
        Rational::from_i64(n).unwrap()
    }

    #[test]
    fn smallest_program() {
        let p = parse_program("p :- skip.").unwrap();
        assert_eq!(p.decls.len(), 1);
        let d = &p.decls["p"];
        assert!(d.formals.is_empty());
        assert_eq!(d.body, Agent::Skip);
        let p = with_entry(p, "p").unwrap();
        assert_eq!(p.entry, Agent::Call("p".into(), vec![]));
    }

    #[test]
    fn branch_without_ask_is_rejected() {
        let err = parse_program("p(X) :- ask(true) -> skip + tell(X=1).").unwrap_err();
        match err {
            ParseError::Syntax {
                line, col, expected, ..
            } => {
                assert_eq!((line, col), (1, 29));
                assert!(expected.contains("ask"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stream_constraint_with_primes() {
        let c = parse_constraint("T = [Aux|T']").unwrap();
        assert_eq!(
            c,
            Constraint::StreamEq("T".into(), Term::cons(Term::var("Aux"), Term::var("T'")))
        );
    }

    #[test]
    fn linear_constraint() {
        let c = parse_constraint("Aux' = Aux - 1").unwrap();
        let mut rhs = LinExpr::var("Aux");
        rhs.constant = q(-1);
        assert_eq!(c, Constraint::Linear(LinExpr::var("Aux'"), RelOp::Eq, rhs));
    }

    #[test]
    fn constraint_forms() {
        assert_eq!(parse_constraint("true").unwrap(), Constraint::True);
        assert_eq!(
            parse_constraint("X = _").unwrap(),
            Constraint::StreamEq("X".into(), Term::Anon)
        );
        assert_eq!(
            parse_constraint("X = Y").unwrap(),
            Constraint::StreamEq("X".into(), Term::var("Y"))
        );
        assert!(matches!(
            parse_constraint("X = 5").unwrap(),
            Constraint::Linear(_, RelOp::Eq, _)
        ));
        assert!(matches!(
            parse_constraint("X =< 2*Y + 3/2").unwrap(),
            Constraint::Linear(_, RelOp::Le, _)
        ));
        assert_eq!(
            parse_constraint("A = [free|_]").unwrap(),
            Constraint::StreamEq("A".into(), Term::cons(Term::atom("free"), Term::Anon))
        );
    }

    #[test]
    fn precedence() {
        let a = parse_agent("ask(X = a) -> skip + ask(X = b) -> tell(Y = c) || skip").unwrap();
        match a {
            Agent::Parallel(l, r) => {
                assert!(matches!(*l, Agent::Choice(ref bs) if bs.len() == 2));
                assert_eq!(*r, Agent::Skip);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn now_without_else_is_sugar() {
        let a = parse_agent("now (X > 0) then tell(Y = a)").unwrap();
        assert_eq!(
            a,
            Agent::now(
                parse_constraint("X > 0").unwrap(),
                Agent::Tell(parse_constraint("Y = a").unwrap()),
                Agent::Skip
            )
        );
    }

    #[test]
    fn missing_terminator_is_positioned() {
        let err = parse_program("p :- skip\nq :- skip.").unwrap_err();
        assert_eq!(err.position(), (2, 1));
    }

    #[test]
    fn arity_and_unknown_procedures() {
        assert!(matches!(
            parse_program("p(X) :- skip. q :- exists Y (p(Y, Y)).").unwrap_err(),
            ParseError::Arity {
                expected: 1,
                found: 2,
                ..
            }
        ));
        assert!(matches!(
            parse_program("q :- r.").unwrap_err(),
            ParseError::UnknownProcedure { .. }
        ));
        let p = parse_program("p(X) :- skip.").unwrap();
        assert!(matches!(with_entry(p, "p").unwrap_err(), ParseError::Arity { .. }));
    }

    #[test]
    fn unbound_variables_are_rejected() {
        let err = parse_program("p(X) :- tell(Y = a).").unwrap_err();
        assert!(matches!(err, ParseError::UnboundVariable { ref var, .. } if var == "Y"));
        parse_program("p(X) :- exists Y (tell(Y = X)).").unwrap();
        let err = parse_program("p(X) :- exists Y (skip) || tell(Y = a).").unwrap_err();
        assert!(matches!(err, ParseError::UnboundVariable { .. }));
    }

    #[test]
    fn duplicate_declarations() {
        assert!(matches!(
            parse_program("p :- skip. p :- skip.").unwrap_err(),
            ParseError::DuplicateDeclaration { .. }
        ));
    }

    #[test]
    fn call_arguments() {
        let a = parse_agent("p(X, 7, a, [b|_], Aux - 1, -2)").unwrap();
        let Agent::Call(_, args) = a else { panic!() };
        assert_eq!(args[0], Arg::Term(Term::var("X")));
        assert_eq!(args[1], Arg::Term(Term::Num(q(7))));
        assert_eq!(args[2], Arg::Term(Term::atom("a")));
        assert!(matches!(args[3], Arg::Term(Term::Cons(..))));
        assert!(matches!(args[4], Arg::Expr(_)));
        assert_eq!(args[5], Arg::Term(Term::Num(q(-2))));
    }

    #[test]
    fn comments_are_skipped() {
        let p = parse_program("% header\np :- skip. % trailing\n").unwrap();
        assert_eq!(p.decls.len(), 1);
    }
}
