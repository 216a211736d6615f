//! Laws of the constraint system: linear emptiness and entailment against
//! Fourier-Motzkin elimination, the cylindric axioms for projection, the
//! diagonal law for parameter passing, and order independence of merges.
//! Each check panics on the first counterexample.

#![allow(dead_code)]

use crate::common::{fm_empty, q, random_system, to_constraint, to_store, Ineq};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tccp::ast::Term;
use tccp::linear::{LinStore, Relation};
use tccp::observe::probes;
use tccp::store::{ScopeKind, Store, ROOT};
use tccp::{parse_constraint, parse_program, with_entry, Arg, Constraint};

const STORES: u64 = 500;

/// Pieces whose disjunction is the negation of `c`.
fn negate(c: &Ineq) -> Vec<Ineq> {
    let neg = |c: &Ineq, rel| Ineq {
        coeffs: c.coeffs.iter().map(|k| -k).collect(),
        constant: -c.constant.clone(),
        rel,
    };
    match c.rel {
        Relation::Ge => vec![neg(c, Relation::Gt)],
        Relation::Gt => vec![neg(c, Relation::Ge)],
        Relation::Eq => vec![
            neg(c, Relation::Gt),
            Ineq {
                rel: Relation::Gt,
                ..c.clone()
            },
        ],
    }
}

fn fm_entails(dims: usize, sys: &[Ineq], c: &Ineq) -> bool {
    negate(c).into_iter().all(|n| {
        let mut ext = sys.to_vec();
        ext.push(n);
        fm_empty(dims, &ext)
    })
}

pub fn emptiness_agrees_with_elimination() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut empties = 0;
    for _ in 0..STORES {
        let sys = random_system(&mut rng, 3, 6);
        let expected = fm_empty(3, &sys);
        empties += usize::from(expected);
        assert_eq!(to_store(3, &sys).is_empty(), expected, "{:?}", sys);
    }
    assert!(empties > 20 && empties < 480, "{} empty systems", empties);
}

pub fn entailment_agrees_with_elimination() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut entailed = 0;
    for _ in 0..STORES {
        let sys = random_system(&mut rng, 3, 5);
        let store = to_store(3, &sys);
        let queries = random_system(&mut rng, 3, 4);
        // some queries are known consequences
        let known = sys.choose(&mut rng).cloned().into_iter();
        for c in queries.into_iter().chain(known) {
            let expected = fm_entails(3, &sys, &c);
            entailed += usize::from(expected);
            assert_eq!(
                store.entails(&to_constraint(&c)).unwrap(),
                expected,
                "{:?} |- {:?}",
                sys,
                c
            );
        }
    }
    assert!(entailed > 100, "{} entailed queries", entailed);
}

fn subset(rng: &mut impl Rng, sys: &[Ineq]) -> Vec<Ineq> {
    sys.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect()
}

pub fn projection_is_extensive() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..STORES {
        let s = to_store(3, &random_system(&mut rng, 3, 5));
        let x = rng.gen_range(0..3);
        assert!(s.entails_store(&s.project(x).unwrap()));
    }
}

pub fn projection_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..STORES {
        let sys = random_system(&mut rng, 3, 5);
        let c = to_store(3, &sys);
        let d = to_store(3, &subset(&mut rng, &sys));
        assert!(c.entails_store(&d));
        let x = rng.gen_range(0..3);
        assert!(c.project(x).unwrap().entails_store(&d.project(x).unwrap()));
    }
}

pub fn projection_absorbs_projected_meets() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..STORES {
        let c = to_store(3, &random_system(&mut rng, 3, 4));
        let d = to_store(3, &random_system(&mut rng, 3, 4));
        let x = rng.gen_range(0..3);
        let dx = d.project(x).unwrap();
        let lhs = c.meet(&dx).unwrap().project(x).unwrap();
        let rhs = c.project(x).unwrap().meet(&dx).unwrap();
        assert!(lhs.equivalent(&rhs), "c={} d={} x={}", c, d, x);
    }
}

pub fn projections_commute() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..STORES {
        let c = to_store(3, &random_system(&mut rng, 3, 5));
        let x = rng.gen_range(0..3);
        let y = (x + rng.gen_range(1..3)) % 3;
        let xy = c.project(y).unwrap().project(x).unwrap();
        let yx = c.project(x).unwrap().project(y).unwrap();
        assert!(xy.equivalent(&yx), "c={} x={} y={}", c, x, y);
    }
}

pub fn projection_forgets_only_its_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..STORES {
        let sys = random_system(&mut rng, 3, 5);
        let s = to_store(3, &sys);
        let x = rng.gen_range(0..3);
        let p = s.project(x).unwrap();
        for mut c in random_system(&mut rng, 3, 3) {
            c.coeffs[x] = q(0);
            assert_eq!(p.entails(&to_constraint(&c)).unwrap(), fm_entails(3, &sys, &c));
        }
        // the projected dimension is unconstrained unless the store is empty
        let mut free = Ineq {
            coeffs: vec![q(0); 3],
            constant: q(-1000),
            rel: Relation::Ge,
        };
        free.coeffs[x] = q(1);
        assert_eq!(p.entails(&to_constraint(&free)).unwrap(), s.is_empty());
    }
}

pub fn false_is_preserved_by_projection() {
    let mut s = LinStore::new();
    s.ensure_dims(2);
    s.add(to_constraint(&Ineq {
        coeffs: vec![q(1), q(0)],
        constant: q(0),
        rel: Relation::Gt,
    }))
    .unwrap();
    s.add(to_constraint(&Ineq {
        coeffs: vec![q(-1), q(0)],
        constant: q(0),
        rel: Relation::Ge,
    }))
    .unwrap();
    assert!(s.is_empty());
    assert!(s.project(0).unwrap().is_empty());
}

// ---------------------------------------------------------------------------
// Store-level laws

const GLOBALS: &[&str] = &["X", "Y", "N", "M"];
const ATOMS: &[&str] = &["a", "b"];

fn random_constraint(rng: &mut impl Rng, vars: &[&str]) -> Constraint {
    let v = *vars.choose(rng).unwrap();
    let w = *vars.choose(rng).unwrap();
    let a = *ATOMS.choose(rng).unwrap();
    let k: i64 = rng.gen_range(-2..=3);
    let text = match rng.gen_range(0..9) {
        0 => format!("{} = [{}|_]", v, a),
        1 => format!("{} = [{}|[{}|_]]", v, a, ATOMS.choose(rng).unwrap()),
        2 => format!("{} = [_|{}]", v, w),
        3 => format!("{} = {}", v, a),
        4 if v != w => format!("{} = {}", v, w),
        5 => format!("{} = {}", v, k),
        6 => format!("{} >= {}", v, k),
        7 => format!("{} + {} <= {}", v, w, k),
        _ => format!("{} > {} - {}", v, w, k.abs()),
    };
    parse_constraint(&text).unwrap()
}

fn global_store(rng: &mut impl Rng) -> Store {
    let mut s = Store::new();
    for v in GLOBALS {
        s.add_variable(ROOT, v).unwrap();
    }
    for _ in 0..rng.gen_range(0..5) {
        let c = random_constraint(rng, GLOBALS);
        s.add_constraint(ROOT, &c).unwrap();
    }
    s
}

pub fn parameters_behave_as_diagonal_elements() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    for _ in 0..200 {
        let mut s = global_store(&mut rng);
        let call = s.new_scope(ROOT, ScopeKind::ProcCall("p".into())).unwrap();
        let mut actuals = GLOBALS.to_vec();
        actuals.shuffle(&mut rng);
        actuals.truncate(rng.gen_range(1..=GLOBALS.len()));
        let formals: Vec<String> = (0..actuals.len()).map(|i| format!("F{}", i)).collect();
        for (f, a) in formals.iter().zip(&actuals) {
            s.add_parameter(call, f, &Arg::Term(Term::var(a)), ROOT).unwrap();
        }
        let to_formal = |v: &str| actuals.iter().position(|a| *a == v).map(|i| formals[i].clone());
        for _ in 0..10 {
            let c = random_constraint(&mut rng, &actuals);
            let inner = c.rename(&to_formal);
            assert_eq!(
                s.entails(call, &inner).unwrap(),
                s.entails(ROOT, &c).unwrap(),
                "{} vs {}\n{}",
                inner,
                c,
                s
            );
            checked += 1;
        }
        // the call scope is a barrier: globals are not visible by name
        if actuals.len() < GLOBALS.len() {
            let hidden = GLOBALS.iter().find(|g| !actuals.contains(g)).unwrap();
            let c = parse_constraint(&format!("{} = [a|_]", hidden)).unwrap();
            assert!(s.entails(call, &c).is_err());
        }
    }
    assert!(checked >= 1000);
}

pub fn diagonal_is_symmetric_and_transitive() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let mut s = global_store(&mut rng);
        let consistent = s.is_consistent();
        // d_XY, d_YN
        s.add_constraint(ROOT, &parse_constraint("X = Y").unwrap()).unwrap();
        s.add_constraint(ROOT, &parse_constraint("Y = N").unwrap()).unwrap();
        if !s.is_consistent() {
            continue;
        }
        assert!(consistent);
        for c in ["Y = X", "X = N", "N = X", "X = X"] {
            assert!(s.entails(ROOT, &parse_constraint(c).unwrap()).unwrap(), "{}", c);
        }
    }
}

/// Tells of two parallel components merged in either order give stores
/// that agree on every probe.
pub fn merge_is_order_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..STORES {
        let base = global_store(&mut rng);
        let left: Vec<Constraint> = (0..rng.gen_range(1..4))
            .map(|_| random_constraint(&mut rng, GLOBALS))
            .collect();
        let right: Vec<Constraint> = (0..rng.gen_range(1..4))
            .map(|_| random_constraint(&mut rng, GLOBALS))
            .collect();
        let merged = |first: &[Constraint], second: &[Constraint]| {
            let mut a = base.snapshot();
            for c in first {
                a.store_mut().add_constraint(ROOT, c).unwrap();
            }
            let mut b = base.snapshot_after(&a);
            for c in second {
                b.store_mut().add_constraint(ROOT, c).unwrap();
            }
            base.merge(vec![a, b])
        };
        let ab = merged(&left, &right);
        let ba = merged(&right, &left);
        assert_eq!(ab.is_consistent(), ba.is_consistent());
        let tells: Vec<String> = left.iter().chain(&right).map(|c| format!("tell({})", c)).collect();
        let entry = format!("{} || tell(X = [a|_]) || tell(N = 0)", tells.join(" || "));
        let program = with_entry(parse_program("").unwrap(), &entry).unwrap();
        for p in probes(&program) {
            assert_eq!(ab.entails(ROOT, &p).unwrap(), ba.entails(ROOT, &p).unwrap(), "{}", p);
        }
        // the merge entails everything either side told
        for c in left.iter().chain(&right) {
            assert!(ab.entails(ROOT, c).unwrap());
        }
    }
}

pub fn merge_matches_sequential_tells() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..STORES {
        let base = global_store(&mut rng);
        let tells: Vec<Constraint> = (0..rng.gen_range(1..5))
            .map(|_| random_constraint(&mut rng, GLOBALS))
            .collect();
        let mut seq = base.clone();
        for c in &tells {
            seq.add_constraint(ROOT, c).unwrap();
        }
        let mut snaps = vec![base.snapshot()];
        for c in &tells {
            let mut s = base.snapshot_after(snaps.last().unwrap());
            s.store_mut().add_constraint(ROOT, c).unwrap();
            snaps.push(s);
        }
        let par = base.merge(snaps);
        assert_eq!(seq.is_consistent(), par.is_consistent());
        let program = with_entry(
            parse_program("").unwrap(),
            "tell(X = [a|[b|_]]) || tell(Y = M) || tell(N = 0)",
        )
        .unwrap();
        for p in probes(&program) {
            assert_eq!(seq.entails(ROOT, &p).unwrap(), par.entails(ROOT, &p).unwrap(), "{}", p);
        }
    }
}
