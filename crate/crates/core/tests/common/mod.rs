//! Generators and independent reference procedures shared by the
//! integration tests.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tccp::ast::{pretty_agent, Agent, Arg, Branch, Constraint, LinExpr, RelOp, Term};
use tccp::linear::{Affine, LinConstraint, LinStore, Relation};
use tccp::Program;

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub const PHOTOCOPIER_ENTRY: &str = "initialize(MIdle) || tell(MIdle = 5)";

pub fn photocopier() -> Program {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../programs/photocopier.tccp");
    let text = std::fs::read_to_string(path).expect("photocopier program");
    let p = tccp::parse_program(&text).expect("photocopier parses");
    tccp::with_entry(p, PHOTOCOPIER_ENTRY).expect("entry parses")
}

// ---------------------------------------------------------------------------
// Linear systems and a Fourier-Motzkin emptiness check

/// `sum coeffs * x + constant  rel  0` over rationals.
#[derive(Clone, Debug)]
pub struct Ineq {
    pub coeffs: Vec<Q>,
    pub constant: Q,
    pub rel: Relation,
}

pub fn random_system(rng: &mut impl Rng, dims: usize, max_len: usize) -> Vec<Ineq> {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| {
            let mut coeffs: Vec<Q> = (0..dims).map(|_| q(rng.gen_range(-3..=3))).collect();
            if rng.gen_bool(0.3) {
                // sparse rows make equalities and bounds more frequent
                let keep = rng.gen_range(0..dims);
                for (i, c) in coeffs.iter_mut().enumerate() {
                    if i != keep {
                        *c = Q::zero();
                    }
                }
            }
            let rel = match rng.gen_range(0..6) {
                0 => Relation::Eq,
                1 | 2 => Relation::Gt,
                _ => Relation::Ge,
            };
            Ineq {
                coeffs,
                constant: q(rng.gen_range(-6..=6)),
                rel,
            }
        })
        .collect()
}

pub fn to_constraint(c: &Ineq) -> LinConstraint {
    let mut a = Affine::constant(c.constant.clone());
    for (d, k) in c.coeffs.iter().enumerate() {
        a.add(d, k.clone());
    }
    LinConstraint::new(&a, c.rel)
}

pub fn to_store(dims: usize, sys: &[Ineq]) -> LinStore {
    let mut s = LinStore::new();
    s.ensure_dims(dims);
    for c in sys {
        s.add(to_constraint(c)).unwrap();
    }
    s
}

/// Emptiness by eliminating every variable; a system is empty iff some
/// ground row is false.
pub fn fm_empty(dims: usize, sys: &[Ineq]) -> bool {
    // rows as (coeffs, constant, strict) meaning expr > 0 or expr >= 0
    let mut rows: Vec<(Vec<Q>, Q, bool)> = Vec::new();
    for c in sys {
        match c.rel {
            Relation::Eq => {
                rows.push((c.coeffs.clone(), c.constant.clone(), false));
                rows.push((c.coeffs.iter().map(|k| -k).collect(), -c.constant.clone(), false));
            }
            Relation::Ge => rows.push((c.coeffs.clone(), c.constant.clone(), false)),
            Relation::Gt => rows.push((c.coeffs.clone(), c.constant.clone(), true)),
        }
    }
    for x in 0..dims {
        let (zero, rest): (Vec<_>, Vec<_>) = rows.into_iter().partition(|r| r.0[x].is_zero());
        let (pos, neg): (Vec<_>, Vec<_>) = rest.into_iter().partition(|r| r.0[x].is_positive());
        rows = zero;
        for p in &pos {
            for n in &neg {
                let a = p.0[x].clone();
                let b = -n.0[x].clone();
                let coeffs: Vec<Q> = (0..dims).map(|i| &p.0[i] * &b + &n.0[i] * &a).collect();
                rows.push((coeffs, &p.1 * &b + &n.1 * &a, p.2 || n.2));
            }
        }
    }
    rows.iter()
        .any(|(_, c, strict)| if *strict { !c.is_positive() } else { c.is_negative() })
}

// ---------------------------------------------------------------------------
// Random programs

const ATOMS: [&str; 4] = ["a", "b", "on", "off"];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Stream,
    Num,
}

struct Gen {
    rng: ChaCha8Rng,
    procs: Vec<(String, Vec<Kind>)>,
    locals: usize,
}

impl Gen {
    fn var(&mut self, scope: &[(String, Kind)], kind: Kind) -> Option<String> {
        let same: Vec<&(String, Kind)> = scope.iter().filter(|(_, k)| *k == kind).collect();
        // occasionally mix kinds so clashes get exercised too
        if !same.is_empty() && self.rng.gen_bool(0.93) {
            return Some(same.choose(&mut self.rng).unwrap().0.clone());
        }
        scope.choose(&mut self.rng).map(|v| v.0.clone())
    }

    fn atom(&mut self) -> Term {
        Term::atom(ATOMS.choose(&mut self.rng).unwrap())
    }

    fn stream_term(&mut self, scope: &[(String, Kind)], depth: usize) -> Term {
        match self.rng.gen_range(0..10) {
            0 => Term::Anon,
            1 => self.atom(),
            2 if depth > 0 => Term::cons(self.atom(), self.stream_term(scope, depth - 1)),
            3 => match self.var(scope, Kind::Stream) {
                Some(v) => Term::Var(v),
                None => self.atom(),
            },
            4 => Term::cons(Term::Num(q(self.rng.gen_range(-1..=3))), Term::Anon),
            5 => {
                let head = match self.var(scope, Kind::Num) {
                    Some(v) => Term::Var(v),
                    None => Term::Anon,
                };
                Term::cons(head, Term::Anon)
            }
            6 => {
                let tail = match self.var(scope, Kind::Stream) {
                    Some(v) => Term::Var(v),
                    None => Term::Anon,
                };
                Term::cons(self.atom(), tail)
            }
            _ => Term::cons(self.atom(), Term::Anon),
        }
    }

    fn linexpr(&mut self, scope: &[(String, Kind)]) -> LinExpr {
        let mut e = LinExpr::constant(q(self.rng.gen_range(-3..=3)));
        for _ in 0..self.rng.gen_range(0..=2) {
            if let Some(v) = self.var(scope, Kind::Num) {
                e.add_term(&v, q(*[-2, -1, 1, 1, 2].choose(&mut self.rng).unwrap()));
            }
        }
        e
    }

    fn constraint(&mut self, scope: &[(String, Kind)], guard: bool) -> Constraint {
        if scope.is_empty() || self.rng.gen_ratio(1, 12) {
            return Constraint::True;
        }
        if self.rng.gen_bool(0.55) {
            let v = self.var(scope, Kind::Stream).unwrap();
            let mut t = self.stream_term(scope, 2);
            if guard && self.rng.gen_bool(0.3) {
                t = Term::cons(self.atom(), Term::Anon);
            }
            Constraint::StreamEq(v, t)
        } else {
            let v = self.var(scope, Kind::Num).unwrap();
            let op = *[RelOp::Eq, RelOp::Eq, RelOp::Gt, RelOp::Ge, RelOp::Lt, RelOp::Le]
                .choose(&mut self.rng)
                .unwrap();
            let rhs = self.linexpr(scope);
            Constraint::Linear(LinExpr::var(&v), op, rhs)
        }
    }

    fn arg(&mut self, scope: &[(String, Kind)], kind: Kind) -> Arg {
        match (kind, self.rng.gen_range(0..6)) {
            (_, 0..=2) => match self.var(scope, kind) {
                Some(v) => Arg::Term(Term::Var(v)),
                None => Arg::Term(Term::Anon),
            },
            (Kind::Stream, 3) => Arg::Term(self.stream_term(scope, 1)),
            (Kind::Stream, _) => Arg::Term(Term::Anon),
            (Kind::Num, 3) => Arg::Term(Term::Num(q(self.rng.gen_range(0..=4)))),
            (Kind::Num, _) => {
                let e = self.linexpr(scope);
                if e.as_single_var().is_some() || e.is_constant() {
                    Arg::Term(Term::Num(e.constant))
                } else {
                    Arg::Expr(e)
                }
            }
        }
    }

    fn call(&mut self, scope: &[(String, Kind)]) -> Agent {
        let (name, kinds) = self.procs.choose(&mut self.rng).unwrap().clone();
        let args = kinds.iter().map(|k| self.arg(scope, *k)).collect();
        Agent::Call(name, args)
    }

    fn agent(&mut self, scope: &mut Vec<(String, Kind)>, depth: usize) -> Agent {
        let pick = if depth == 0 {
            self.rng.gen_range(0..3)
        } else {
            self.rng.gen_range(0..11)
        };
        match pick {
            0 => Agent::Tell(self.constraint(scope, false)),
            1 => Agent::Tell(self.constraint(scope, false)),
            2 => Agent::Choice(vec![Branch {
                guard: Constraint::True,
                body: self.call(scope),
            }]),
            3 | 4 => Agent::par(self.agent(scope, depth - 1), self.agent(scope, depth - 1)),
            5 | 6 => {
                let n = self.rng.gen_range(1..=3);
                let branches = (0..n)
                    .map(|_| Branch {
                        guard: self.constraint(scope, true),
                        body: self.agent(scope, depth - 1),
                    })
                    .collect();
                Agent::Choice(branches)
            }
            7 | 8 => Agent::now(
                self.constraint(scope, true),
                self.agent(scope, depth - 1),
                self.agent(scope, depth - 1),
            ),
            9 => {
                self.locals += 1;
                let name = format!("L{}", self.locals);
                let kind = if self.rng.gen_bool(0.5) {
                    Kind::Stream
                } else {
                    Kind::Num
                };
                scope.push((name.clone(), kind));
                let body = self.agent(scope, depth - 1);
                scope.pop();
                Agent::Exists(vec![name], Box::new(body))
            }
            _ => Agent::Skip,
        }
    }
}

/// A random well-scoped program text with its entry agent. Generated text
/// goes through the parser, so the programs also exercise it.
pub fn random_program(seed: u64) -> (String, String) {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        procs: Vec::new(),
        locals: 0,
    };
    let nprocs = g.rng.gen_range(1..=4);
    for i in 0..nprocs {
        let arity = g.rng.gen_range(0..=3);
        let kinds = (0..arity)
            .map(|_| if g.rng.gen_bool(0.5) { Kind::Stream } else { Kind::Num })
            .collect();
        g.procs.push((format!("p{}", i), kinds));
    }
    let mut text = String::new();
    for (name, kinds) in g.procs.clone() {
        let mut scope: Vec<(String, Kind)> = kinds.iter().enumerate().map(|(i, k)| (format!("F{}", i), *k)).collect();
        let body = g.agent(&mut scope, 3);
        let formals: Vec<String> = scope.iter().map(|v| v.0.clone()).collect();
        if formals.is_empty() {
            text.push_str(&format!("{} :- {}.\n", name, pretty_agent(&body)));
        } else {
            text.push_str(&format!(
                "{}({}) :- {}.\n",
                name,
                formals.join(", "),
                pretty_agent(&body)
            ));
        }
    }
    let mut scope = vec![
        ("X".to_string(), Kind::Stream),
        ("Y".to_string(), Kind::Stream),
        ("N".to_string(), Kind::Num),
        ("M".to_string(), Kind::Num),
    ];
    let mut parts = Vec::new();
    for _ in 0..g.rng.gen_range(1..=3) {
        parts.push(g.call(&scope));
    }
    for _ in 0..g.rng.gen_range(0..=2) {
        parts.push(g.agent(&mut scope, 2));
    }
    let entry = parts
        .iter()
        .map(|a| format!("({})", pretty_agent(a)))
        .collect::<Vec<_>>()
        .join(" || ");
    (text, entry)
}

pub fn parse_random(seed: u64) -> Program {
    let (text, entry) = random_program(seed);
    let p = tccp::parse_program(&text).unwrap_or_else(|e| panic!("seed {}: {}\n{}", seed, e, text));
    tccp::with_entry(p, &entry).unwrap_or_else(|e| panic!("seed {}: {}\n{}", seed, e, entry))
}

// ---------------------------------------------------------------------------
// Per-rule golden programs

pub struct Golden {
    pub name: String,
    pub program: Program,
    pub expect: Vec<String>,
}

pub fn goldens() -> Vec<Golden> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../programs/rules");
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .expect("rules directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "tccp"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let text = std::fs::read_to_string(&path).unwrap();
            let field = |key: &str| {
                text.lines()
                    .filter_map(|l| l.strip_prefix(key))
                    .map(|l| l.trim().to_string())
                    .collect::<Vec<_>>()
            };
            let entry = field("% entry:").pop().expect("entry line");
            let program = tccp::with_entry(tccp::parse_program(&text).unwrap(), &entry).unwrap();
            Golden {
                name: path.file_stem().unwrap().to_string_lossy().into_owned(),
                program,
                expect: field("% expect:"),
            }
        })
        .collect()
}

/// One line per trace element: clock, status, entry values and the active agents.
pub fn golden_lines(trace: &tccp::interpreter::Trace) -> Vec<String> {
    trace
        .elements
        .iter()
        .map(|e| {
            let values: Vec<String> = trace
                .entry_vars
                .iter()
                .map(|(n, r)| format!("{}={}", n, e.store.render(*r)))
                .collect();
            let active: Vec<String> = e.active.iter().map(|t| pretty_agent(&t.agent)).collect();
            format!(
                "{} {} {} | {}",
                e.clock,
                e.status,
                values.join(" "),
                active.join(" || ")
            )
            .trim_end()
            .to_string()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Machine against oracle

/// First disagreement between the observations of the two interpreters.
pub fn compare(p: &Program, steps: usize, policy: tccp::interpreter::ChoicePolicy) -> Result<(), String> {
    use tccp::interpreter::run;
    use tccp::oracle::{observe, oracle_run};
    let machine = tccp::observe::observe_trace(p, &run(p, steps, policy).map_err(|e| e.to_string())?);
    let oracle = observe(p, &oracle_run(p, steps, policy).map_err(|e| e.to_string())?);
    if machine.len() != oracle.len() {
        return Err(format!("trace lengths {} vs {}", machine.len(), oracle.len()));
    }
    for (m, o) in machine.iter().zip(&oracle) {
        if m != o {
            return Err(format!("instant {}:\n  machine {:?}\n  oracle  {:?}", m.clock, m, o));
        }
    }
    Ok(())
}
