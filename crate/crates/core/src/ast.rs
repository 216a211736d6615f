//! Abstract syntax of tccp agents, constraints and programs, plus the
//! pretty-printer whose output the parser reads back.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rational = BigRational;

/// A stream-level term.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Atom(String),
    Num(Rational),
    Var(String),
    Anon,
    Cons(Box<Term>, Box<Term>),
}

impl Term {
    pub fn cons(head: Term, tail: Term) -> Term {
        Term::Cons(Box::new(head), Box::new(tail))
    }

    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn atom(name: &str) -> Term {
        Term::Atom(name.to_string())
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => push_unique(out, v),
            Term::Cons(h, t) => {
                h.collect_vars(out);
                t.collect_vars(out);
            }
            _ => {}
        }
    }

    fn rename(&self, f: &dyn Fn(&str) -> Option<String>) -> Term {
        match self {
            Term::Var(v) => Term::Var(f(v).unwrap_or_else(|| v.clone())),
            Term::Cons(h, t) => Term::cons(h.rename(f), t.rename(f)),
            other => other.clone(),
        }
    }
}

/// Affine expression: `sum(coeff * var) + constant` with exact rational
/// coefficients. Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct LinExpr {
    pub terms: BTreeMap<String, Rational>,
    pub constant: Rational,
}

impl LinExpr {
    pub fn constant(value: Rational) -> Self {
        LinExpr {
            terms: BTreeMap::new(),
            constant: value,
        }
    }

    pub fn var(name: &str) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(name.to_string(), Rational::one());
        LinExpr {
            terms,
            constant: Rational::zero(),
        }
    }

    pub fn add_term(&mut self, name: &str, coeff: Rational) {
        let entry = self.terms.entry(name.to_string()).or_insert_with(Rational::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(name);
        }
    }

    pub fn plus(mut self, other: &LinExpr) -> Self {
        for (v, c) in &other.terms {
            self.add_term(v, c.clone());
        }
        self.constant += &other.constant;
        self
    }

    pub fn scale(mut self, k: &Rational) -> Self {
        if k.is_zero() {
            return LinExpr::default();
        }
        for c in self.terms.values_mut() {
            *c *= k;
        }
        self.constant *= k;
        self
    }

    pub fn negate(self) -> Self {
        self.scale(&-Rational::one())
    }

    /// `Some(name)` when the expression is exactly one variable.
    pub fn as_single_var(&self) -> Option<&str> {
        if !self.constant.is_zero() || self.terms.len() != 1 {
            return None;
        }
        let (v, c) = self.terms.iter().next()?;
        c.is_one().then_some(v.as_str())
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    fn rename(&self, f: &dyn Fn(&str) -> Option<String>) -> LinExpr {
        let mut out = LinExpr::constant(self.constant.clone());
        for (v, c) in &self.terms {
            let name = f(v).unwrap_or_else(|| v.clone());
            out.add_term(&name, c.clone());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelOp {
    Eq,
    Lt,
    Gt,
    Le,
    Ge,
}

impl RelOp {
    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Eq => "=",
            RelOp::Lt => "<",
            RelOp::Gt => ">",
            RelOp::Le => "<=",
            RelOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Constraint {
    True,
    StreamEq(String, Term),
    Linear(LinExpr, RelOp, LinExpr),
}

impl Constraint {
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            Constraint::True => {}
            Constraint::StreamEq(v, t) => {
                push_unique(&mut out, v);
                t.collect_vars(&mut out);
            }
            Constraint::Linear(l, _, r) => {
                for v in l.terms.keys().chain(r.terms.keys()) {
                    push_unique(&mut out, v);
                }
            }
        }
        out
    }

    pub fn rename(&self, f: &dyn Fn(&str) -> Option<String>) -> Constraint {
        match self {
            Constraint::True => Constraint::True,
            Constraint::StreamEq(v, t) => Constraint::StreamEq(f(v).unwrap_or_else(|| v.clone()), t.rename(f)),
            Constraint::Linear(l, op, r) => Constraint::Linear(l.rename(f), *op, r.rename(f)),
        }
    }
}

/// Actual parameter of a procedure call.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Arg {
    Term(Term),
    Expr(LinExpr),
}

impl Arg {
    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Arg::Term(t) => t.collect_vars(out),
            Arg::Expr(e) => {
                for v in e.terms.keys() {
                    push_unique(out, v);
                }
            }
        }
    }

    pub fn rename(&self, f: &dyn Fn(&str) -> Option<String>) -> Arg {
        match self {
            Arg::Term(t) => Arg::Term(t.rename(f)),
            Arg::Expr(e) => Arg::Expr(e.rename(f)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Branch {
    pub guard: Constraint,
    pub body: Agent,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Agent {
    Skip,
    Tell(Constraint),
    Parallel(Box<Agent>, Box<Agent>),
    Choice(Vec<Branch>),
    Now(Constraint, Box<Agent>, Box<Agent>),
    Exists(Vec<String>, Box<Agent>),
    Call(String, Vec<Arg>),
}

impl Agent {
    pub fn par(left: Agent, right: Agent) -> Agent {
        Agent::Parallel(Box::new(left), Box::new(right))
    }

    pub fn now(cond: Constraint, then: Agent, otherwise: Agent) -> Agent {
        Agent::Now(cond, Box::new(then), Box::new(otherwise))
    }

    pub fn exists(vars: &[&str], body: Agent) -> Agent {
        Agent::Exists(vars.iter().map(|v| v.to_string()).collect(), Box::new(body))
    }

    /// Splits nested top-level parallel compositions into a flat list.
    pub fn flatten_parallel(self) -> Vec<Agent> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(a) = stack.pop() {
            match a {
                Agent::Parallel(l, r) => {
                    stack.push(*r);
                    stack.push(*l);
                }
                other => out.push(other),
            }
        }
        out
    }

    /// Variables occurring free (not bound by an enclosing `exists`), in
    /// order of first occurrence.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut Vec<String>) {
        let note = |vars: Vec<String>, bound: &Vec<String>, out: &mut Vec<String>| {
            for v in vars {
                if !bound.contains(&v) {
                    push_unique(out, &v);
                }
            }
        };
        match self {
            Agent::Skip => {}
            Agent::Tell(c) => note(c.vars(), bound, out),
            Agent::Parallel(l, r) => {
                l.collect_free(bound, out);
                r.collect_free(bound, out);
            }
            Agent::Choice(bs) => {
                for b in bs {
                    note(b.guard.vars(), bound, out);
                    b.body.collect_free(bound, out);
                }
            }
            Agent::Now(c, a, b) => {
                note(c.vars(), bound, out);
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Agent::Exists(vs, body) => {
                let mark = bound.len();
                bound.extend(vs.iter().cloned());
                body.collect_free(bound, out);
                bound.truncate(mark);
            }
            Agent::Call(_, args) => {
                let mut vars = Vec::new();
                for a in args {
                    a.collect_vars(&mut vars);
                }
                note(vars, bound, out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Agent::Skip | Agent::Tell(_) | Agent::Call(..) => 1,
            Agent::Parallel(l, r) => 1 + l.depth().max(r.depth()),
            Agent::Choice(bs) => 1 + bs.iter().map(|b| b.body.depth()).max().unwrap_or(0),
            Agent::Now(_, a, b) => 1 + a.depth().max(b.depth()),
            Agent::Exists(_, a) => 1 + a.depth(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Declaration {
    pub formals: Vec<String>,
    pub body: Agent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub decls: BTreeMap<String, Declaration>,
    pub entry: Agent,
}

impl Program {
    pub fn decl(&self, name: &str) -> Option<&Declaration> {
        self.decls.get(name)
    }

    /// Atoms mentioned anywhere in the program, sorted.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn term(t: &Term, out: &mut BTreeSet<String>) {
            match t {
                Term::Atom(a) => {
                    out.insert(a.clone());
                }
                Term::Cons(h, tl) => {
                    term(h, out);
                    term(tl, out);
                }
                _ => {}
            }
        }
        fn cons(c: &Constraint, out: &mut BTreeSet<String>) {
            if let Constraint::StreamEq(_, t) = c {
                term(t, out);
            }
        }
        fn agent(a: &Agent, out: &mut BTreeSet<String>) {
            match a {
                Agent::Skip => {}
                Agent::Tell(c) => cons(c, out),
                Agent::Parallel(l, r) => {
                    agent(l, out);
                    agent(r, out);
                }
                Agent::Choice(bs) => {
                    for b in bs {
                        cons(&b.guard, out);
                        agent(&b.body, out);
                    }
                }
                Agent::Now(c, l, r) => {
                    cons(c, out);
                    agent(l, out);
                    agent(r, out);
                }
                Agent::Exists(_, b) => agent(b, out),
                Agent::Call(_, args) => {
                    for a in args {
                        if let Arg::Term(t) = a {
                            term(t, out);
                        }
                    }
                }
            }
        }
        for d in self.decls.values() {
            agent(&d.body, &mut out);
        }
        agent(&self.entry, &mut out);
        out
    }
}

fn push_unique(out: &mut Vec<String>, v: &str) {
    if !out.iter().any(|x| x == v) {
        out.push(v.to_string());
    }
}

// ---------------------------------------------------------------------------
// Pretty-printing

pub fn fmt_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(a) => f.write_str(a),
            Term::Num(q) => f.write_str(&fmt_rational(q)),
            Term::Var(v) => f.write_str(v),
            Term::Anon => f.write_str("_"),
            Term::Cons(h, t) => write!(f, "[{}|{}]", h, t),
        }
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.terms {
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else if c.is_negative() {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            if mag.is_one() {
                f.write_str(v)?;
            } else {
                write!(f, "{}*{}", fmt_rational(&mag), v)?;
            }
            first = false;
        }
        if first {
            f.write_str(&fmt_rational(&self.constant))?;
        } else if !self.constant.is_zero() {
            let sep = if self.constant.is_negative() { " - " } else { " + " };
            write!(f, "{}{}", sep, fmt_rational(&self.constant.abs()))?;
        }
        Ok(())
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::True => f.write_str("true"),
            Constraint::StreamEq(v, t) => write!(f, "{} = {}", v, t),
            Constraint::Linear(l, op, r) => write!(f, "{} {} {}", l, op.symbol(), r),
        }
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Term(t) => t.fmt(f),
            Arg::Expr(e) => e.fmt(f),
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Agent::Skip => f.write_str("skip"),
            Agent::Tell(c) => write!(f, "tell({})", c),
            Agent::Parallel(l, r) => {
                write_operand(f, l, true)?;
                f.write_str(" || ")?;
                write_operand(f, r, false)
            }
            Agent::Choice(bs) => {
                for (i, b) in bs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "ask({}) -> ", b.guard)?;
                    match b.body {
                        Agent::Parallel(..) | Agent::Choice(_) | Agent::Now(..) => write!(f, "({})", b.body)?,
                        _ => b.body.fmt(f)?,
                    }
                }
                Ok(())
            }
            Agent::Now(c, a, b) => write!(f, "now ({}) then {} else {}", c, a, b),
            Agent::Exists(vs, body) => write!(f, "exists {} ({})", vs.join(", "), body),
            Agent::Call(name, args) => {
                f.write_str(name)?;
                if !args.is_empty() {
                    f.write_str("(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        a.fmt(f)?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

// `||` is right-nested by the parser, so a parallel on the left needs
// parentheses to survive a round trip; a `now` anywhere but the last
// position would swallow the rest through its greedy `else`.
fn write_operand(f: &mut fmt::Formatter<'_>, a: &Agent, left: bool) -> fmt::Result {
    match a {
        Agent::Parallel(..) if left => write!(f, "({})", a),
        Agent::Now(..) => write!(f, "({})", a),
        _ => write!(f, "{}", a),
    }
}

impl fmt::Display for Declaration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.body)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, d) in &self.decls {
            f.write_str(name)?;
            if !d.formals.is_empty() {
                write!(f, "({})", d.formals.join(", "))?;
            }
            writeln!(f, " :- {}.", d.body)?;
        }
        Ok(())
    }
}

pub fn pretty_agent(a: &Agent) -> String {
    a.to_string()
}

pub fn pretty_constraint(c: &Constraint) -> String {
    c.to_string()
}
