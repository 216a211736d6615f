//! Reference interpreter applying the transition rules directly.
//!
//! A configuration is a list of agents over global variable names and a
//! flat list of told constraints. Hiding renames local variables apart,
//! procedure calls substitute actuals for formals, and the constraint set
//! is solved from scratch whenever it is queried. No symbol table or
//! register memory is involved, so the abstract machine can be checked
//! against it.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ast::{fmt_rational, Agent, Arg, Branch, Constraint, LinExpr, Program, Rational, RelOp, Term};
use crate::interpreter::{ChoicePolicy, RunError, Status};
use crate::linear::{Affine, LinConstraint, LinStore};
use crate::observe::{probes, Observation};

#[derive(Clone, Debug)]
pub struct OracleState {
    pub clock: u64,
    pub status: Status,
    pub agents: Vec<Agent>,
    pub constraints: Vec<Constraint>,
}

impl OracleState {
    pub fn solve(&self) -> Solved {
        Solved::new(&self.constraints)
    }
}

/// Runs `program` with the rule-level semantics.
pub fn oracle_run(program: &Program, steps: usize, policy: ChoicePolicy) -> Result<Vec<OracleState>, RunError> {
    let mut m = Machine {
        program,
        policy,
        rng: ChaCha8Rng::seed_from_u64(match policy {
            ChoicePolicy::Random(s) => s,
            _ => 0,
        }),
        fresh: 0,
    };
    let mut agents = Vec::new();
    push(&mut agents, program.entry.clone());
    let mut cur = OracleState {
        clock: 0,
        status: Status::Running,
        agents,
        constraints: Vec::new(),
    };
    let mut out = Vec::new();
    for _ in 0..steps {
        let solved = cur.solve();
        let mut next = Vec::new();
        let mut told = Vec::new();
        let mut moved = false;
        for a in &cur.agents {
            moved |= m.exec(a.clone(), &solved, &mut next, &mut told)?;
        }
        if !moved {
            cur.status = Status::Quiescent;
            break;
        }
        let mut constraints = cur.constraints.clone();
        constraints.extend(told);
        let mut succ = OracleState {
            clock: cur.clock + 1,
            status: Status::Running,
            agents: next,
            constraints,
        };
        if !succ.solve().consistent {
            succ.status = Status::Failed;
        }
        out.push(std::mem::replace(&mut cur, succ));
        if cur.status == Status::Failed {
            break;
        }
    }
    out.push(cur);
    Ok(out)
}

/// Observations of an oracle run, comparable with
/// [`crate::observe::observe_trace`].
pub fn observe(program: &Program, states: &[OracleState]) -> Vec<Observation> {
    let probes = probes(program);
    let vars = program.entry.free_vars();
    states
        .iter()
        .map(|s| {
            let solved = s.solve();
            Observation {
                clock: s.clock,
                status: s.status,
                values: if solved.consistent {
                    vars.iter().map(|v| solved.render(v)).collect()
                } else {
                    Vec::new()
                },
                probes: probes.iter().map(|c| solved.entails(c)).collect(),
            }
        })
        .collect()
}

struct Machine<'p> {
    program: &'p Program,
    policy: ChoicePolicy,
    rng: ChaCha8Rng,
    fresh: usize,
}

impl Machine<'_> {
    fn fresh(&mut self, base: &str) -> String {
        self.fresh += 1;
        format!("{}#{}", base, self.fresh)
    }

    fn exec(
        &mut self,
        a: Agent,
        d: &Solved,
        next: &mut Vec<Agent>,
        told: &mut Vec<Constraint>,
    ) -> Result<bool, RunError> {
        match a {
            Agent::Skip => Ok(false),
            Agent::Tell(c) => {
                told.push(c);
                Ok(true)
            }
            Agent::Parallel(l, r) => {
                let ml = self.exec(*l, d, next, told)?;
                let mr = self.exec(*r, d, next, told)?;
                Ok(ml || mr)
            }
            Agent::Choice(bs) => {
                let enabled: Vec<usize> = (0..bs.len()).filter(|&i| d.entails(&bs[i].guard)).collect();
                if enabled.is_empty() {
                    next.push(Agent::Choice(bs));
                    return Ok(false);
                }
                let k = match self.policy {
                    ChoicePolicy::First => 0,
                    ChoicePolicy::Last => enabled.len() - 1,
                    ChoicePolicy::Random(_) => self.rng.gen_range(0..enabled.len()),
                };
                let body = bs.into_iter().nth(enabled[k]).expect("enabled").body;
                push(next, body);
                Ok(true)
            }
            Agent::Now(c, then, other) => {
                let branch = if d.entails(&c) { *then } else { *other };
                self.exec(branch, d, next, told)?;
                Ok(true)
            }
            Agent::Exists(vars, body) => {
                let map: HashMap<String, String> = vars.iter().map(|v| (v.clone(), self.fresh(v))).collect();
                let body = subst(&body, &map, &mut self.fresh);
                self.exec(body, d, next, told)
            }
            Agent::Call(name, args) => {
                let decl = self
                    .program
                    .decl(&name)
                    .filter(|decl| decl.formals.len() == args.len())
                    .ok_or_else(|| RunError::UnknownProcedure(name.clone(), args.len()))?;
                let mut map = HashMap::new();
                for (f, a) in decl.formals.iter().zip(args) {
                    match a {
                        Arg::Term(Term::Var(v)) => {
                            map.insert(f.clone(), v);
                        }
                        Arg::Term(Term::Anon) => {
                            map.insert(f.clone(), self.fresh(f));
                        }
                        Arg::Term(t) => {
                            let v = self.fresh(f);
                            told.push(Constraint::StreamEq(v.clone(), t));
                            map.insert(f.clone(), v);
                        }
                        Arg::Expr(e) => {
                            let v = self.fresh(f);
                            told.push(Constraint::Linear(LinExpr::var(&v), RelOp::Eq, e));
                            map.insert(f.clone(), v);
                        }
                    }
                }
                push(next, subst(&decl.body, &map, &mut self.fresh));
                Ok(true)
            }
        }
    }
}

fn push(next: &mut Vec<Agent>, a: Agent) {
    next.extend(a.flatten_parallel().into_iter().filter(|a| *a != Agent::Skip));
}

/// Capture-avoiding renaming of free variables. Binders that clash with a
/// substituted name are renamed apart.
fn subst(a: &Agent, map: &HashMap<String, String>, fresh: &mut usize) -> Agent {
    let f = |v: &str| map.get(v).cloned();
    match a {
        Agent::Skip => Agent::Skip,
        Agent::Tell(c) => Agent::Tell(c.rename(&f)),
        Agent::Parallel(l, r) => Agent::par(subst(l, map, fresh), subst(r, map, fresh)),
        Agent::Choice(bs) => Agent::Choice(
            bs.iter()
                .map(|b| Branch {
                    guard: b.guard.rename(&f),
                    body: subst(&b.body, map, fresh),
                })
                .collect(),
        ),
        Agent::Now(c, x, y) => Agent::now(c.rename(&f), subst(x, map, fresh), subst(y, map, fresh)),
        Agent::Exists(vs, body) => {
            let mut inner = map.clone();
            let mut bound = Vec::new();
            for v in vs {
                if map.values().any(|t| t == v) {
                    *fresh += 1;
                    let renamed = format!("{}#{}", v, fresh);
                    inner.insert(v.clone(), renamed.clone());
                    bound.push(renamed);
                } else {
                    inner.remove(v);
                    bound.push(v.clone());
                }
            }
            Agent::Exists(bound, Box::new(subst(body, &inner, fresh)))
        }
        Agent::Call(n, args) => Agent::Call(n.clone(), args.iter().map(|x| x.rename(&f)).collect()),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum OTerm {
    Atom(String),
    Num(Rational),
    Var(String),
    Cons(Box<OTerm>, Box<OTerm>),
}

/// Solved form of a constraint set: a substitution for the Herbrand part
/// and a linear system over the numeric variables.
pub struct Solved {
    pub consistent: bool,
    bindings: HashMap<String, OTerm>,
    dims: BTreeMap<String, usize>,
    lin: LinStore,
}

impl Solved {
    fn new(cs: &[Constraint]) -> Solved {
        let mut s = Solved {
            consistent: true,
            bindings: HashMap::new(),
            dims: BTreeMap::new(),
            lin: LinStore::new(),
        };
        let mut anon = 0;
        for c in cs {
            if let Constraint::StreamEq(v, t) = c {
                let t = s.import(t, &mut anon);
                if !s.unify(OTerm::Var(v.clone()), t) {
                    s.consistent = false;
                }
            }
        }
        for c in cs {
            if let Constraint::Linear(l, op, r) = c {
                let (Some(a), Some(b)) = (s.affine(l, true), s.affine(r, true)) else {
                    s.consistent = false;
                    continue;
                };
                s.lin.add(LinConstraint::compare(&a, *op, &b)).expect("dims allocated");
            }
        }
        if s.lin.is_empty() {
            s.consistent = false;
        }
        s
    }

    fn import(&self, t: &Term, anon: &mut usize) -> OTerm {
        match t {
            Term::Atom(a) => OTerm::Atom(a.clone()),
            Term::Num(q) => OTerm::Num(q.clone()),
            Term::Var(v) => OTerm::Var(v.clone()),
            Term::Anon => {
                *anon += 1;
                OTerm::Var(format!("_#{}", anon))
            }
            Term::Cons(h, tl) => OTerm::Cons(Box::new(self.import(h, anon)), Box::new(self.import(tl, anon))),
        }
    }

    fn walk(&self, t: &OTerm) -> OTerm {
        let mut t = t.clone();
        while let OTerm::Var(v) = &t {
            match self.bindings.get(v) {
                Some(b) => t = b.clone(),
                None => break,
            }
        }
        t
    }

    fn occurs(&self, v: &str, t: &OTerm) -> bool {
        match self.walk(t) {
            OTerm::Var(w) => w == v,
            OTerm::Cons(h, tl) => self.occurs(v, &h) || self.occurs(v, &tl),
            _ => false,
        }
    }

    fn unify(&mut self, a: OTerm, b: OTerm) -> bool {
        let (a, b) = (self.walk(&a), self.walk(&b));
        match (a, b) {
            (OTerm::Var(x), OTerm::Var(y)) if x == y => true,
            (OTerm::Var(x), t) | (t, OTerm::Var(x)) => {
                if self.occurs(&x, &t) {
                    return false;
                }
                self.bindings.insert(x, t);
                true
            }
            (OTerm::Atom(x), OTerm::Atom(y)) => x == y,
            (OTerm::Num(x), OTerm::Num(y)) => x == y,
            (OTerm::Cons(h1, t1), OTerm::Cons(h2, t2)) => self.unify(*h1, *h2) && self.unify(*t1, *t2),
            _ => false,
        }
    }

    /// `None` when some variable is bound to a non-number.
    fn affine(&mut self, e: &LinExpr, allocate: bool) -> Option<Affine> {
        let mut out = Affine::constant(e.constant.clone());
        for (v, k) in &e.terms {
            match self.walk(&OTerm::Var(v.clone())) {
                OTerm::Num(q) => out.constant += k * q,
                OTerm::Var(rep) => {
                    let d = match self.dims.get(&rep) {
                        Some(d) => *d,
                        None if allocate => {
                            let d = self.lin.add_dim();
                            self.dims.insert(rep, d);
                            d
                        }
                        None => return None,
                    };
                    out.add(d, k.clone());
                }
                _ => return None,
            }
        }
        Some(out)
    }

    fn dim_equals(&self, d: usize, q: &Rational) -> bool {
        self.lin.entails(&LinConstraint::fix(d, q.clone())).unwrap_or(false)
    }

    pub fn entails(&self, c: &Constraint) -> bool {
        if !self.consistent {
            return true;
        }
        match c {
            Constraint::True => true,
            Constraint::StreamEq(v, t) => self.matches(&OTerm::Var(v.clone()), t),
            Constraint::Linear(l, op, r) => {
                let mut probe = Solved {
                    consistent: true,
                    bindings: self.bindings.clone(),
                    dims: self.dims.clone(),
                    lin: self.lin.clone(),
                };
                let (Some(a), Some(b)) = (probe.affine(l, true), probe.affine(r, true)) else {
                    return false;
                };
                probe.lin.entails(&LinConstraint::compare(&a, *op, &b)).unwrap_or(false)
            }
        }
    }

    fn matches(&self, x: &OTerm, t: &Term) -> bool {
        let x = self.walk(x);
        match (t, &x) {
            (Term::Anon, _) => true,
            (Term::Var(w), _) => self.equal(&x, &OTerm::Var(w.clone())),
            (Term::Atom(a), OTerm::Atom(b)) => a == b,
            (Term::Num(q), OTerm::Num(p)) => q == p,
            (Term::Num(q), OTerm::Var(v)) => self.dims.get(v).is_some_and(|d| self.dim_equals(*d, q)),
            (Term::Cons(h, tl), OTerm::Cons(xh, xt)) => self.matches(xh, h) && self.matches(xt, tl),
            _ => false,
        }
    }

    fn equal(&self, x: &OTerm, y: &OTerm) -> bool {
        let (x, y) = (self.walk(x), self.walk(y));
        match (&x, &y) {
            (OTerm::Var(a), OTerm::Var(b)) => {
                a == b
                    || match (self.dims.get(a), self.dims.get(b)) {
                        (Some(da), Some(db)) => {
                            let c = LinConstraint::compare(&Affine::dim(*da), RelOp::Eq, &Affine::dim(*db));
                            self.lin.entails(&c).unwrap_or(false)
                        }
                        _ => false,
                    }
            }
            (OTerm::Var(a), OTerm::Num(q)) | (OTerm::Num(q), OTerm::Var(a)) => {
                self.dims.get(a).is_some_and(|d| self.dim_equals(*d, q))
            }
            (OTerm::Atom(a), OTerm::Atom(b)) => a == b,
            (OTerm::Num(p), OTerm::Num(q)) => p == q,
            (OTerm::Cons(h1, t1), OTerm::Cons(h2, t2)) => self.equal(h1, h2) && self.equal(t1, t2),
            _ => false,
        }
    }

    pub fn render(&self, v: &str) -> String {
        self.render_term(&OTerm::Var(v.to_string()))
    }

    fn render_term(&self, t: &OTerm) -> String {
        match self.walk(t) {
            OTerm::Atom(a) => a,
            OTerm::Num(q) => fmt_rational(&q),
            OTerm::Var(v) => match self.dims.get(&v) {
                Some(d) => self
                    .lin
                    .fixed_value(*d)
                    .map_or_else(|| "#".to_string(), |q| fmt_rational(&q)),
                None => "_".into(),
            },
            OTerm::Cons(h, tl) => format!("[{}|{}]", self.render_term(&h), self.render_term(&tl)),
        }
    }
}
