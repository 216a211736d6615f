//! Monotonic store of affine constraints over rational dimensions.
//!
//! Constraints are kept in a canonical integer form (gcd 1, sign rule on
//! equalities) so two stores built from the same facts compare equal.
//! Emptiness is decided by a two-phase exact simplex in which strict
//! inequalities share one slack `eps` that is maximised in phase two.
//! Projection uses Fourier-Motzkin elimination.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::ast::RelOp;

type Q = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinError {
    #[error("dimension D_{dim} is not allocated (store has {dims})")]
    UnallocatedDimension { dim: usize, dims: usize },
    #[error("cannot meet stores with {left} and {right} dimensions")]
    DimensionMismatch { left: usize, right: usize },
}

/// `expr rel 0` after normalisation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Eq,
    Ge,
    Gt,
}

/// Rational affine expression over dimensions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Affine {
    pub coeffs: BTreeMap<usize, Q>,
    pub constant: Q,
}

impl Affine {
    pub fn constant(c: Q) -> Self {
        Affine {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn dim(d: usize) -> Self {
        let mut a = Affine::default();
        a.add(d, Q::one());
        a
    }

    pub fn add(&mut self, dim: usize, k: Q) {
        let e = self.coeffs.entry(dim).or_insert_with(Q::zero);
        *e += k;
        if e.is_zero() {
            self.coeffs.remove(&dim);
        }
    }

    pub fn sub(mut self, other: &Affine) -> Affine {
        for (d, k) in &other.coeffs {
            self.add(*d, -k.clone());
        }
        self.constant -= &other.constant;
        self
    }
}

/// Canonical constraint `sum(coeffs) + constant  rel  0` with integer
/// coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinConstraint {
    coeffs: Vec<(usize, BigInt)>,
    constant: BigInt,
    rel: Relation,
}

impl LinConstraint {
    pub fn new(expr: &Affine, rel: Relation) -> Self {
        let mut lcm = BigInt::one();
        for k in expr.coeffs.values().chain(std::iter::once(&expr.constant)) {
            lcm = lcm.lcm(k.denom());
        }
        let scale = |k: &Q| (k * Q::from_integer(lcm.clone())).to_integer();
        let mut coeffs: Vec<(usize, BigInt)> = expr
            .coeffs
            .iter()
            .map(|(d, k)| (*d, scale(k)))
            .filter(|(_, k)| !k.is_zero())
            .collect();
        let mut constant = scale(&expr.constant);
        let mut g = constant.abs();
        for (_, k) in &coeffs {
            g = g.gcd(k);
        }
        if !g.is_zero() && !g.is_one() {
            for (_, k) in coeffs.iter_mut() {
                *k /= &g;
            }
            constant /= &g;
        }
        if rel == Relation::Eq {
            let lead_negative = match coeffs.first() {
                Some((_, k)) => k.is_negative(),
                None => constant.is_negative(),
            };
            if lead_negative {
                for (_, k) in coeffs.iter_mut() {
                    *k = -k.clone();
                }
                constant = -constant;
            }
        }
        LinConstraint { coeffs, constant, rel }
    }

    /// `lhs op rhs`, mapped onto the three canonical relations.
    pub fn compare(lhs: &Affine, op: RelOp, rhs: &Affine) -> Self {
        match op {
            RelOp::Eq => Self::new(&lhs.clone().sub(rhs), Relation::Eq),
            RelOp::Ge => Self::new(&lhs.clone().sub(rhs), Relation::Ge),
            RelOp::Gt => Self::new(&lhs.clone().sub(rhs), Relation::Gt),
            RelOp::Le => Self::new(&rhs.clone().sub(lhs), Relation::Ge),
            RelOp::Lt => Self::new(&rhs.clone().sub(lhs), Relation::Gt),
        }
    }

    /// `dim = value`
    pub fn fix(dim: usize, value: Q) -> Self {
        let mut a = Affine::dim(dim);
        a.constant = -value;
        Self::new(&a, Relation::Eq)
    }

    pub fn rel(&self) -> Relation {
        self.rel
    }

    pub fn coeffs(&self) -> &[(usize, BigInt)] {
        &self.coeffs
    }

    pub fn constant_term(&self) -> &BigInt {
        &self.constant
    }

    pub fn coeff(&self, dim: usize) -> BigInt {
        self.coeffs
            .iter()
            .find(|(d, _)| *d == dim)
            .map(|(_, k)| k.clone())
            .unwrap_or_else(BigInt::zero)
    }

    pub fn max_dim(&self) -> Option<usize> {
        self.coeffs.last().map(|(d, _)| *d)
    }

    pub fn is_ground(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Truth value of a constraint without variables.
    pub fn ground_truth(&self) -> Option<bool> {
        if !self.is_ground() {
            return None;
        }
        Some(match self.rel {
            Relation::Eq => self.constant.is_zero(),
            Relation::Ge => !self.constant.is_negative(),
            Relation::Gt => self.constant.is_positive(),
        })
    }

    pub fn to_affine(&self) -> Affine {
        let mut a = Affine::constant(Q::from_integer(self.constant.clone()));
        for (d, k) in &self.coeffs {
            a.add(*d, Q::from_integer(k.clone()));
        }
        a
    }

    /// The constraints whose disjunction is the negation of `self`.
    fn negation(&self) -> Vec<LinConstraint> {
        let e = self.to_affine();
        let neg = Affine::default().sub(&e);
        match self.rel {
            Relation::Ge => vec![Self::new(&neg, Relation::Gt)],
            Relation::Gt => vec![Self::new(&neg, Relation::Ge)],
            Relation::Eq => vec![Self::new(&neg, Relation::Gt), Self::new(&e, Relation::Gt)],
        }
    }

    pub fn eval(&self, point: &[Q]) -> bool {
        let mut v = Q::from_integer(self.constant.clone());
        for (d, k) in &self.coeffs {
            v += Q::from_integer(k.clone()) * &point[*d];
        }
        match self.rel {
            Relation::Eq => v.is_zero(),
            Relation::Ge => !v.is_negative(),
            Relation::Gt => v.is_positive(),
        }
    }
}

impl fmt::Display for LinConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            f.write_str("0")?;
        }
        for (i, (d, k)) in self.coeffs.iter().enumerate() {
            let mag = k.abs();
            match (i, k.is_negative()) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if mag.is_one() {
                write!(f, "D_{}", d)?;
            } else {
                write!(f, "{}*D_{}", mag, d)?;
            }
        }
        let op = match self.rel {
            Relation::Eq => "=",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        };
        write!(f, " {} {}", op, -self.constant.clone())
    }
}

/// A point, by dimension. Missing dimensions read as zero.
type Point = BTreeMap<usize, Q>;

fn value_at(c: &LinConstraint, point: &Point) -> Q {
    let mut v = Q::from_integer(c.constant.clone());
    for (d, k) in &c.coeffs {
        if let Some(x) = point.get(d) {
            v += Q::from_integer(k.clone()) * x;
        }
    }
    v
}

fn holds(c: &LinConstraint, point: &Point) -> bool {
    let v = value_at(c, point);
    match c.rel {
        Relation::Eq => v.is_zero(),
        Relation::Ge => !v.is_negative(),
        Relation::Gt => v.is_positive(),
    }
}

/// The store itself. Cloning is the snapshot operation.
///
/// A satisfying point is cached while the store is non-empty, so most
/// insertions and many failed entailment checks need no simplex run.
#[derive(Clone, Debug, Default)]
pub struct LinStore {
    dims: usize,
    system: BTreeSet<LinConstraint>,
    empty: bool,
    witness: Option<Point>,
}

impl PartialEq for LinStore {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.system == other.system && self.empty == other.empty
    }
}

impl Eq for LinStore {}

impl LinStore {
    pub fn new() -> Self {
        Self {
            witness: Some(Point::new()),
            ..Self::default()
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn add_dim(&mut self) -> usize {
        self.dims += 1;
        self.dims - 1
    }

    /// Grows the dimension count to at least `dims`.
    pub fn ensure_dims(&mut self, dims: usize) {
        self.dims = self.dims.max(dims);
    }

    pub fn constraints(&self) -> impl Iterator<Item = &LinConstraint> {
        self.system.iter()
    }

    pub fn len(&self) -> usize {
        self.system.len()
    }

    fn check(&self, c: &LinConstraint) -> Result<(), LinError> {
        match c.max_dim() {
            Some(d) if d >= self.dims => Err(LinError::UnallocatedDimension {
                dim: d,
                dims: self.dims,
            }),
            _ => Ok(()),
        }
    }

    pub fn add(&mut self, c: LinConstraint) -> Result<(), LinError> {
        self.check(&c)?;
        if let Some(t) = c.ground_truth() {
            if !t {
                self.mark_empty();
                self.system.insert(c);
            }
            return Ok(());
        }
        if self.system.insert(c.clone()) && !self.empty {
            self.refresh(&[c]);
        }
        Ok(())
    }

    fn mark_empty(&mut self) {
        self.empty = true;
        self.witness = None;
    }

    /// Restores the witness after `added` joined the system.
    fn refresh(&mut self, added: &[LinConstraint]) {
        if let Some(w) = self.witness.as_mut() {
            let mut ok = true;
            for c in added {
                if holds(c, w) {
                    continue;
                }
                if !repair(&self.system, c, w) {
                    ok = false;
                    break;
                }
            }
            if ok && added.iter().all(|c| holds(c, w)) {
                return;
            }
        }
        let dims: BTreeSet<usize> = added.iter().flat_map(|c| c.coeffs.iter().map(|(d, _)| *d)).collect();
        let part = component(&self.system, &dims);
        match solve(part.iter().copied()) {
            Some(sol) => {
                let w = self.witness.get_or_insert_with(Point::new);
                let touched: BTreeSet<usize> = part.iter().flat_map(|c| c.coeffs.iter().map(|(d, _)| *d)).collect();
                for d in touched {
                    match sol.get(&d) {
                        Some(x) => w.insert(d, x.clone()),
                        None => w.remove(&d),
                    };
                }
                if !self.system.iter().all(|c| holds(c, w)) {
                    self.witness = None;
                }
            }
            None => self.mark_empty(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn entails(&self, c: &LinConstraint) -> Result<bool, LinError> {
        self.check(c)?;
        if self.empty || self.system.contains(c) {
            return Ok(true);
        }
        if let Some(t) = c.ground_truth() {
            return Ok(t);
        }
        if let Some(w) = &self.witness {
            if !holds(c, w) {
                return Ok(false);
            }
        }
        let dims: BTreeSet<usize> = c.coeffs.iter().map(|(d, _)| *d).collect();
        let part = component(&self.system, &dims);
        let (rest, c) = presolve(&part, c);
        if let Some(t) = c.ground_truth() {
            return Ok(t);
        }
        let dims: BTreeSet<usize> = c.coeffs.iter().map(|(d, _)| *d).collect();
        let rest: BTreeSet<LinConstraint> = rest.into_iter().collect();
        let part = component(&rest, &dims);
        Ok(c.negation()
            .iter()
            .all(|n| !feasible(part.iter().copied().chain(std::iter::once(n)))))
    }

    /// Every constraint of `other` is entailed by `self`.
    pub fn entails_store(&self, other: &LinStore) -> bool {
        if self.empty {
            return true;
        }
        if other.empty {
            return false;
        }
        other.system.iter().all(|c| self.entails_unchecked(c))
    }

    fn entails_unchecked(&self, c: &LinConstraint) -> bool {
        let mut wide = self.clone();
        wide.ensure_dims(c.max_dim().map_or(0, |d| d + 1));
        wide.entails(c).unwrap_or(false)
    }

    /// Logical equivalence.
    pub fn equivalent(&self, other: &LinStore) -> bool {
        self.entails_store(other) && other.entails_store(self)
    }

    pub fn meet(&self, other: &LinStore) -> Result<LinStore, LinError> {
        if self.dims != other.dims {
            return Err(LinError::DimensionMismatch {
                left: self.dims,
                right: other.dims,
            });
        }
        let mut out = self.clone();
        out.absorb(other);
        Ok(out)
    }

    /// Conjoins every constraint of `other` (dimensions are widened as
    /// needed) and re-checks emptiness once.
    pub fn absorb(&mut self, other: &LinStore) {
        self.ensure_dims(other.dims);
        let mut added = Vec::new();
        for c in &other.system {
            if self.system.insert(c.clone()) {
                added.push(c.clone());
            }
        }
        if self.empty {
            return;
        }
        if other.empty {
            self.mark_empty();
        } else if !added.is_empty() {
            self.refresh(&added);
        }
    }

    /// Existential quantification of `dim` (the dimension stays allocated
    /// but becomes unconstrained).
    pub fn project(&self, dim: usize) -> Result<LinStore, LinError> {
        if dim >= self.dims {
            return Err(LinError::UnallocatedDimension { dim, dims: self.dims });
        }
        if self.empty {
            return Ok(self.clone());
        }
        let system = eliminate(self.system.iter().cloned().collect(), dim);
        let mut out = LinStore {
            dims: self.dims,
            ..LinStore::new()
        };
        for c in system {
            match c.ground_truth() {
                Some(true) => {}
                Some(false) => {
                    out.mark_empty();
                    out.system.insert(c);
                }
                None => {
                    out.system.insert(c);
                }
            }
        }
        if !out.empty {
            out.witness = self.witness.clone().map(|mut w| {
                w.remove(&dim);
                w
            });
        }
        Ok(out)
    }

    /// The unique value of `dim` in every solution, if there is one.
    pub fn fixed_value(&self, dim: usize) -> Option<Q> {
        if self.empty || dim >= self.dims {
            return None;
        }
        let hi = optimize(self.system.iter(), dim, true)?;
        let lo = optimize(self.system.iter(), dim, false)?;
        (hi == lo).then_some(hi)
    }
}

impl fmt::Display for LinStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.system {
            writeln!(f, "{}", c)?;
        }
        Ok(())
    }
}

/// One Fourier-Motzkin step. Equalities mentioning `dim` are used for
/// substitution when present.
fn eliminate(system: Vec<LinConstraint>, dim: usize) -> Vec<LinConstraint> {
    let pivot = system
        .iter()
        .position(|c| c.rel == Relation::Eq && !c.coeff(dim).is_zero());
    if let Some(p) = pivot {
        let eq = system[p].clone();
        let a = Q::from_integer(eq.coeff(dim));
        let eq_aff = eq.to_affine();
        return system
            .into_iter()
            .enumerate()
            .filter(|(i, _)| *i != p)
            .map(|(_, c)| {
                let k = c.coeff(dim);
                if k.is_zero() {
                    return c;
                }
                // c - (k/a) * eq, scaled by |a| to keep the inequality direction
                let factor = Q::from_integer(k) / &a;
                let mut e = c.to_affine();
                for (d, v) in &eq_aff.coeffs {
                    e.add(*d, -(v * &factor));
                }
                e.constant -= &eq_aff.constant * &factor;
                e.coeffs.remove(&dim);
                LinConstraint::new(&e, c.rel)
            })
            .collect();
    }
    let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
    for c in system {
        let k = c.coeff(dim);
        if k.is_positive() {
            pos.push(c);
        } else if k.is_negative() {
            neg.push(c);
        } else {
            rest.push(c);
        }
    }
    for p in &pos {
        for n in &neg {
            let kp = Q::from_integer(p.coeff(dim));
            let kn = Q::from_integer(-n.coeff(dim));
            let mut e = Affine::default();
            let (pa, na) = (p.to_affine(), n.to_affine());
            for (d, v) in &pa.coeffs {
                e.add(*d, v * &kn);
            }
            for (d, v) in &na.coeffs {
                e.add(*d, v * &kp);
            }
            e.constant = &pa.constant * &kn + &na.constant * &kp;
            e.coeffs.remove(&dim);
            let rel = if p.rel == Relation::Gt || n.rel == Relation::Gt {
                Relation::Gt
            } else {
                Relation::Ge
            };
            rest.push(LinConstraint::new(&e, rel));
        }
    }
    rest.sort();
    rest.dedup();
    rest
}

// ---------------------------------------------------------------------------
// Exact simplex

struct Tableau {
    rows: Vec<Vec<Q>>,
    rhs: Vec<Q>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v /= &p;
        }
        self.rhs[r] /= &p;
        let prow = self.rows[r].clone();
        let prhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for (j, pv) in prow.iter().enumerate() {
                if !pv.is_zero() {
                    let delta = pv * &f;
                    self.rows[i][j] -= delta;
                }
            }
            self.rhs[i] -= &prhs * &f;
        }
        self.basis[r] = c;
    }

    /// Maximises `obj . x` over columns for which `allowed` holds, using
    /// Bland's rule. `None` when unbounded.
    fn maximize(&mut self, obj: &[Q], allowed: &dyn Fn(usize) -> bool) -> Option<Q> {
        loop {
            let mut entering = None;
            for j in 0..self.width {
                if !allowed(j) || self.basis.contains(&j) {
                    continue;
                }
                let mut rc = -obj[j].clone();
                for (i, row) in self.rows.iter().enumerate() {
                    let cb = &obj[self.basis[i]];
                    if !cb.is_zero() && !row[j].is_zero() {
                        rc += cb * &row[j];
                    }
                }
                if rc.is_negative() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                let mut value = Q::zero();
                for (i, b) in self.basis.iter().enumerate() {
                    value += &obj[*b] * &self.rhs[i];
                }
                return Some(value);
            };
            let mut leave: Option<(usize, Q)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[j].is_positive() {
                    let ratio = &self.rhs[i] / &row[j];
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let (r, _) = leave?;
            self.pivot(r, j);
        }
    }
}

/// Column layout shared by the feasibility and optimisation problems.
struct Layout {
    dim_col: BTreeMap<usize, usize>,
    eps: Option<usize>,
    artificial_from: usize,
}

/// Builds `A x = b, x >= 0` with every free dimension split in two and an
/// artificial column per row. Phase one has been run when this returns
/// `Some`; `None` means the closure is infeasible.
fn phase_one<'a>(
    cons: impl Iterator<Item = &'a LinConstraint>,
    strict: bool,
    extra_dim: Option<usize>,
) -> Option<(Tableau, Layout)> {
    let cons: Vec<&LinConstraint> = cons.collect();
    let mut dim_col = BTreeMap::new();
    let mut next = 0;
    for c in &cons {
        for (d, _) in &c.coeffs {
            dim_col.entry(*d).or_insert_with(|| {
                next += 2;
                next - 2
            });
        }
    }
    if let Some(d) = extra_dim {
        dim_col.entry(d).or_insert_with(|| {
            next += 2;
            next - 2
        });
    }
    let has_strict = strict && cons.iter().any(|c| c.rel == Relation::Gt);
    let slack_from = next;
    let n_slack = cons.iter().filter(|c| c.rel != Relation::Eq).count();
    let mut width = slack_from + n_slack;
    let eps = if has_strict {
        width += 2; // eps and its upper-bound slack
        Some(slack_from + n_slack)
    } else {
        None
    };
    let m = cons.len() + usize::from(has_strict);
    let artificial_from = width;
    width += m;

    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut slack = slack_from;
    for c in &cons {
        let mut row = vec![Q::zero(); width];
        for (d, k) in &c.coeffs {
            let col = dim_col[d];
            row[col] = Q::from_integer(k.clone());
            row[col + 1] = -Q::from_integer(k.clone());
        }
        if c.rel != Relation::Eq {
            row[slack] = -Q::one();
            slack += 1;
            if c.rel == Relation::Gt {
                if let Some(e) = eps {
                    row[e] = -Q::one();
                }
            }
        }
        rows.push(row);
        rhs.push(-Q::from_integer(c.constant.clone()));
    }
    if let Some(e) = eps {
        let mut row = vec![Q::zero(); width];
        row[e] = Q::one();
        row[e + 1] = Q::one();
        rows.push(row);
        rhs.push(Q::one());
    }
    for (i, row) in rows.iter_mut().enumerate() {
        if rhs[i].is_negative() {
            for v in row.iter_mut() {
                *v = -v.clone();
            }
            rhs[i] = -rhs[i].clone();
        }
        row[artificial_from + i] = Q::one();
    }
    let basis = (0..m).map(|i| artificial_from + i).collect();
    let mut t = Tableau {
        rows,
        rhs,
        basis,
        width,
    };
    let mut obj = vec![Q::zero(); width];
    for o in obj.iter_mut().skip(artificial_from) {
        *o = -Q::one();
    }
    let value = t.maximize(&obj, &|_| true)?;
    if value.is_negative() {
        return None;
    }
    // drive remaining artificials out of the basis
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= artificial_from {
            match (0..artificial_from).find(|&j| !t.rows[i][j].is_zero()) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.rhs.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    Some((
        t,
        Layout {
            dim_col,
            eps,
            artificial_from,
        },
    ))
}

/// Moves `w` onto `c` through a dimension no other constraint mentions.
fn repair(system: &BTreeSet<LinConstraint>, c: &LinConstraint, w: &mut Point) -> bool {
    let Some((d, k)) = c
        .coeffs
        .iter()
        .find(|(d, _)| system.iter().filter(|o| o.coeffs.iter().any(|(e, _)| e == d)).count() == 1)
    else {
        return false;
    };
    let k = Q::from_integer(k.clone());
    let current = w.get(d).cloned().unwrap_or_else(Q::zero);
    let rest = value_at(c, w) - &k * &current;
    let target = if c.rel == Relation::Gt { Q::one() } else { Q::zero() };
    w.insert(*d, (target - rest) / k);
    true
}

/// Eliminates the equalities of a satisfiable system by substitution,
/// returning the remaining inequalities and the rewritten query.
fn presolve(system: &[&LinConstraint], query: &LinConstraint) -> (Vec<LinConstraint>, LinConstraint) {
    fn apply(subs: &BTreeMap<usize, Affine>, a: &Affine) -> Affine {
        let mut out = Affine::constant(a.constant.clone());
        for (d, k) in &a.coeffs {
            match subs.get(d) {
                Some(e) => {
                    for (f, j) in &e.coeffs {
                        out.add(*f, k * j);
                    }
                    out.constant += k * &e.constant;
                }
                None => out.add(*d, k.clone()),
            }
        }
        out
    }
    let mut subs: BTreeMap<usize, Affine> = BTreeMap::new();
    for c in system.iter().filter(|c| c.rel == Relation::Eq) {
        let a = apply(&subs, &c.to_affine());
        let Some((&d, k)) = a.coeffs.iter().next() else {
            continue;
        };
        let k = k.clone();
        let mut def = Affine::constant(-&a.constant / &k);
        for (f, j) in a.coeffs.iter().filter(|(f, _)| **f != d) {
            def.add(*f, -j / &k);
        }
        let single = BTreeMap::from([(d, def.clone())]);
        for e in subs.values_mut() {
            *e = apply(&single, e);
        }
        subs.insert(d, def);
    }
    let rest = system
        .iter()
        .filter(|c| c.rel != Relation::Eq)
        .map(|c| LinConstraint::new(&apply(&subs, &c.to_affine()), c.rel))
        .filter(|c| c.ground_truth().is_none())
        .collect();
    (rest, LinConstraint::new(&apply(&subs, &query.to_affine()), query.rel))
}

/// Constraints connected to `dims` through shared dimensions.
fn component<'a>(system: &'a BTreeSet<LinConstraint>, dims: &BTreeSet<usize>) -> Vec<&'a LinConstraint> {
    let mut by_dim: BTreeMap<usize, Vec<&LinConstraint>> = BTreeMap::new();
    for c in system {
        for (d, _) in &c.coeffs {
            by_dim.entry(*d).or_default().push(c);
        }
    }
    let mut seen: BTreeSet<usize> = dims.clone();
    let mut todo: Vec<usize> = dims.iter().copied().collect();
    let mut out: BTreeSet<&LinConstraint> = BTreeSet::new();
    while let Some(d) = todo.pop() {
        for c in by_dim.get(&d).into_iter().flatten() {
            if out.insert(c) {
                for (e, _) in &c.coeffs {
                    if seen.insert(*e) {
                        todo.push(*e);
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

/// A point satisfying every constraint, strictness included.
fn solve<'a>(cons: impl Iterator<Item = &'a LinConstraint>) -> Option<Point> {
    let cons: Vec<&LinConstraint> = cons.collect();
    if cons.iter().any(|c| c.ground_truth() == Some(false)) {
        return None;
    }
    let (mut t, layout) = phase_one(cons.iter().copied(), true, None)?;
    if let Some(eps) = layout.eps {
        let mut obj = vec![Q::zero(); t.width];
        obj[eps] = Q::one();
        let limit = layout.artificial_from;
        if !t.maximize(&obj, &|j| j < limit)?.is_positive() {
            return None;
        }
    }
    let mut col_value = vec![Q::zero(); t.width];
    for (i, b) in t.basis.iter().enumerate() {
        col_value[*b] = t.rhs[i].clone();
    }
    Some(
        layout
            .dim_col
            .iter()
            .map(|(d, col)| (*d, &col_value[*col] - &col_value[col + 1]))
            .filter(|(_, v)| !v.is_zero())
            .collect(),
    )
}

/// Rational satisfiability of a conjunction, strictness included.
pub(crate) fn feasible<'a>(cons: impl Iterator<Item = &'a LinConstraint>) -> bool {
    solve(cons).is_some()
}

/// Supremum (or infimum) of `dim` over the closure of the system.
fn optimize<'a>(cons: impl Iterator<Item = &'a LinConstraint>, dim: usize, maximize: bool) -> Option<Q> {
    let (mut t, layout) = phase_one(cons, false, Some(dim))?;
    let col = layout.dim_col[&dim];
    let mut obj = vec![Q::zero(); t.width];
    let sign = if maximize { Q::one() } else { -Q::one() };
    obj[col] = sign.clone();
    obj[col + 1] = -sign.clone();
    let limit = layout.artificial_from;
    let v = t.maximize(&obj, &|j| j < limit)?;
    Some(if maximize { v } else { -v })
}
