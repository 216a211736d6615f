//! Observable behaviour of a run, used to compare the abstract machine
//! against the reference interpreter.
//!
//! An observation records, per time instant, the status, a rendering of
//! every entry variable and which of a fixed set of probe constraints are
//! entailed. An inconsistent store entails everything and its bindings are
//! not meaningful, so no values are recorded for it.

use num_bigint::BigInt;

use crate::ast::{Constraint, LinExpr, Program, Rational, RelOp, Term};
use crate::interpreter::{Status, Trace};
use crate::store::ROOT;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub clock: u64,
    pub status: Status,
    pub values: Vec<String>,
    pub probes: Vec<bool>,
}

/// Probe constraints over the entry variables of `program`.
pub fn probes(program: &Program) -> Vec<Constraint> {
    let vars = program.entry.free_vars();
    let atoms = program.atoms();
    let num = |n: i64| Rational::from_integer(BigInt::from(n));
    let mut out = Vec::new();
    for v in &vars {
        out.push(Constraint::StreamEq(v.clone(), Term::cons(Term::Anon, Term::Anon)));
        for a in &atoms {
            out.push(Constraint::StreamEq(v.clone(), Term::atom(a)));
            out.push(Constraint::StreamEq(v.clone(), Term::cons(Term::atom(a), Term::Anon)));
        }
        for n in -1..=2 {
            out.push(Constraint::StreamEq(v.clone(), Term::Num(num(n))));
            out.push(Constraint::StreamEq(
                v.clone(),
                Term::cons(Term::Num(num(n)), Term::Anon),
            ));
        }
        for (op, n) in [(RelOp::Gt, 0), (RelOp::Ge, 0), (RelOp::Lt, 2)] {
            out.push(Constraint::Linear(LinExpr::var(v), op, LinExpr::constant(num(n))));
        }
        for w in &vars {
            if w != v {
                out.push(Constraint::StreamEq(v.clone(), Term::var(w)));
                out.push(Constraint::Linear(LinExpr::var(v), RelOp::Le, LinExpr::var(w)));
            }
        }
    }
    out
}

/// Observations of an abstract-machine trace.
pub fn observe_trace(program: &Program, trace: &Trace) -> Vec<Observation> {
    let probes = probes(program);
    trace
        .elements
        .iter()
        .map(|e| Observation {
            clock: e.clock,
            status: e.status,
            values: if e.store.is_consistent() {
                trace.entry_vars.iter().map(|(_, r)| e.store.render(*r)).collect()
            } else {
                Vec::new()
            },
            probes: probes
                .iter()
                .map(|c| e.store.entails(ROOT, c).expect("probe over entry variables"))
                .collect(),
        })
        .collect()
}
