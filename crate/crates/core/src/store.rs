//! Memory of the abstract machine.
//!
//! The store is split into a symbol-table tree that gives every variable
//! its scope, a register array holding stream structure and references,
//! and a [`LinStore`] for the numeric part. Agents only touch it through
//! the basic instructions `is_consistent`, `add_variable`,
//! `add_parameter`, `add_constraint`, `entails` and `merge`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::ast::{fmt_rational, Arg, Constraint, LinExpr, Rational, Term};
use crate::linear::{Affine, LinConstraint, LinError, LinStore};

pub type Reg = usize;
pub type NodeId = usize;

pub const ROOT: NodeId = 0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("variable {name} is already declared in scope N{scope}")]
    DuplicateInScope { name: String, scope: NodeId },
    #[error("unknown symbol {name} in scope N{scope}")]
    UnknownSymbol { name: String, scope: NodeId },
    #[error("actual parameter {name} is not visible from scope N{scope}")]
    UnboundActual { name: String, scope: NodeId },
    #[error("scope N{0} does not exist")]
    UnknownScope(NodeId),
    #[error("scope N{0} was not created by a procedure call")]
    NotProcCall(NodeId),
    #[error(transparent)]
    Linear(#[from] LinError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Atom(Arc<str>),
    Num(Rational),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Atom(a) => f.write_str(a),
            Value::Num(q) => f.write_str(&fmt_rational(q)),
        }
    }
}

/// Contents of one register.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MemCell {
    Constant(Value),
    /// Numeric variable represented by a dimension of the linear store.
    DiscreteVar(usize),
    Reference(Reg),
    /// Stream cell; the head is at the given register, the tail right after.
    Functor(Reg),
    Unbound,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScopeKind {
    Root,
    ProcCall(String),
    Exists,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScopeNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub kind: ScopeKind,
    pub symbols: BTreeMap<String, Reg>,
}

/// Store term with variables already resolved to registers.
#[derive(Clone, Debug)]
enum RTerm {
    Atom(Arc<str>),
    Num(Rational),
    Reg(Reg),
    Anon,
    Cons(Box<RTerm>, Box<RTerm>),
}

/// Operand of a linear constraint after dereferencing.
enum Operand {
    Dim(usize),
    Const(Rational),
    Fresh(Reg),
    NonNumeric,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Store {
    scopes: Vec<Arc<ScopeNode>>,
    memory: Vec<MemCell>,
    lin: LinStore,
    step_false: bool,
}

impl Default for Store {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Marks {
    regs: usize,
    dims: usize,
    nodes: usize,
}

/// A copy of a store that an agent may mutate during one time instant.
/// Allocation numbering is shared with the origin and with the snapshots
/// taken before it, so merging never renumbers anything.
#[derive(Clone, Debug)]
pub struct Snapshot {
    store: Store,
    base: Marks,
}

impl Snapshot {
    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut Store {
        &mut self.store
    }

    pub fn into_store(self) -> Store {
        self.store
    }
}

impl Store {
    pub fn new() -> Self {
        Store {
            scopes: vec![Arc::new(ScopeNode {
                id: ROOT,
                parent: None,
                kind: ScopeKind::Root,
                symbols: BTreeMap::new(),
            })],
            memory: Vec::new(),
            lin: LinStore::new(),
            step_false: false,
        }
    }

    pub fn node_count(&self) -> usize {
        self.scopes.len()
    }

    pub fn register_count(&self) -> usize {
        self.memory.len()
    }

    pub fn dims(&self) -> usize {
        self.lin.dims()
    }

    pub fn lin(&self) -> &LinStore {
        &self.lin
    }

    pub fn memory(&self) -> &[MemCell] {
        &self.memory
    }

    pub fn scopes(&self) -> impl Iterator<Item = &ScopeNode> {
        self.scopes.iter().map(|n| n.as_ref())
    }

    pub fn scope(&self, id: NodeId) -> Option<&ScopeNode> {
        self.scopes.get(id).map(|n| n.as_ref())
    }

    fn marks(&self) -> Marks {
        Marks {
            regs: self.memory.len(),
            dims: self.lin.dims(),
            nodes: self.scopes.len(),
        }
    }

    fn alloc(&mut self, cell: MemCell) -> Reg {
        self.memory.push(cell);
        self.memory.len() - 1
    }

    // -- basic instructions -------------------------------------------------

    pub fn is_consistent(&self) -> bool {
        !self.step_false && !self.lin.is_empty()
    }

    pub fn new_scope(&mut self, parent: NodeId, kind: ScopeKind) -> Result<NodeId, StoreError> {
        if parent >= self.scopes.len() {
            return Err(StoreError::UnknownScope(parent));
        }
        let id = self.scopes.len();
        self.scopes.push(Arc::new(ScopeNode {
            id,
            parent: Some(parent),
            kind,
            symbols: BTreeMap::new(),
        }));
        Ok(id)
    }

    fn bind_symbol(&mut self, scope: NodeId, name: &str, reg: Reg) -> Result<(), StoreError> {
        let node = self.scopes.get_mut(scope).ok_or(StoreError::UnknownScope(scope))?;
        if node.symbols.contains_key(name) {
            return Err(StoreError::DuplicateInScope {
                name: name.to_string(),
                scope,
            });
        }
        Arc::make_mut(node).symbols.insert(name.to_string(), reg);
        Ok(())
    }

    /// Declares `name` as a fresh, unconstrained variable local to `scope`.
    pub fn add_variable(&mut self, scope: NodeId, name: &str) -> Result<Reg, StoreError> {
        if scope >= self.scopes.len() {
            return Err(StoreError::UnknownScope(scope));
        }
        if self.scopes[scope].symbols.contains_key(name) {
            return Err(StoreError::DuplicateInScope {
                name: name.to_string(),
                scope,
            });
        }
        let reg = self.alloc(MemCell::Unbound);
        self.bind_symbol(scope, name, reg)?;
        Ok(reg)
    }

    /// Links the formal parameter `formal` of a procedure-call scope to the
    /// actual argument, resolved from `caller`.
    pub fn add_parameter(
        &mut self,
        callee: NodeId,
        formal: &str,
        actual: &Arg,
        caller: NodeId,
    ) -> Result<Reg, StoreError> {
        match self.scopes.get(callee).map(|n| &n.kind) {
            None => return Err(StoreError::UnknownScope(callee)),
            Some(ScopeKind::ProcCall(_)) => {}
            Some(_) => return Err(StoreError::NotProcCall(callee)),
        }
        let reg = match actual {
            Arg::Term(t) => {
                let rt = self.resolve(caller, t).map_err(|e| match e {
                    StoreError::UnknownSymbol { name, scope } => StoreError::UnboundActual { name, scope },
                    other => other,
                })?;
                match rt {
                    RTerm::Reg(r) => r,
                    other => self.build(&other),
                }
            }
            Arg::Expr(e) => {
                let dim = self.lin.add_dim();
                let reg = self.alloc(MemCell::DiscreteVar(dim));
                let rhs = match self.affine(caller, e, true)? {
                    Some(a) => a,
                    None => {
                        self.step_false = true;
                        Affine::default()
                    }
                };
                let c = LinConstraint::compare(&Affine::dim(dim), crate::ast::RelOp::Eq, &rhs);
                self.lin.add(c)?;
                reg
            }
        };
        self.bind_symbol(callee, formal, reg)?;
        Ok(reg)
    }

    /// Tells `c` in `scope`.
    pub fn add_constraint(&mut self, scope: NodeId, c: &Constraint) -> Result<(), StoreError> {
        match c {
            Constraint::True => Ok(()),
            Constraint::StreamEq(v, t) => {
                let r = self.lookup(scope, v)?;
                let rt = self.resolve(scope, t)?;
                self.unify_term(r, &rt);
                Ok(())
            }
            Constraint::Linear(l, op, r) => {
                let (Some(lhs), Some(rhs)) = (self.affine(scope, l, true)?, self.affine(scope, r, true)?) else {
                    self.step_false = true;
                    return Ok(());
                };
                self.lin.add(LinConstraint::compare(&lhs, *op, &rhs))?;
                Ok(())
            }
        }
    }

    /// Entailment of `c` read from `scope`. Never mutates the store.
    pub fn entails(&self, scope: NodeId, c: &Constraint) -> Result<bool, StoreError> {
        self.view().entails(scope, c)
    }

    /// Entailment against this store's constraints while resolving names
    /// through the scopes of `local`. Registers allocated by `local` after
    /// this store was snapshotted read as unbound. Used so every agent of
    /// a time instant sees the store as it was when the instant began.
    pub fn entails_from(&self, local: &Store, scope: NodeId, c: &Constraint) -> Result<bool, StoreError> {
        View {
            scopes: &local.scopes,
            memory: &self.memory,
            lin: &self.lin,
            inconsistent: !self.is_consistent(),
        }
        .entails(scope, c)
    }

    pub fn lookup(&self, scope: NodeId, name: &str) -> Result<Reg, StoreError> {
        lookup_in(&self.scopes, scope, name)
    }

    pub fn deref(&self, reg: Reg) -> Reg {
        self.view().deref(reg)
    }

    fn view(&self) -> View<'_> {
        View {
            scopes: &self.scopes,
            memory: &self.memory,
            lin: &self.lin,
            inconsistent: !self.is_consistent(),
        }
    }

    // -- snapshots ----------------------------------------------------------

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            store: self.clone(),
            base: self.marks(),
        }
    }

    /// A snapshot of `self` whose fresh allocations start after those of
    /// `prev`, an earlier snapshot of the same store.
    pub fn snapshot_after(&self, prev: &Snapshot) -> Snapshot {
        debug_assert_eq!(prev.base, self.marks());
        let mut store = self.clone();
        store.memory.extend_from_slice(&prev.store.memory[self.memory.len()..]);
        store
            .scopes
            .extend(prev.store.scopes[self.scopes.len()..].iter().cloned());
        store.lin.ensure_dims(prev.store.lin.dims());
        Snapshot {
            store,
            base: self.marks(),
        }
    }

    /// Combines the snapshots of one instant into a single store. The
    /// result is inconsistent when the snapshots disagree.
    pub fn merge(&self, locals: Vec<Snapshot>) -> Store {
        let mut locals = locals;
        if locals.len() <= 1 {
            return locals.pop().map_or_else(|| self.clone(), Snapshot::into_store);
        }
        let base = self.marks();
        let mut out = self.clone();
        let end = locals.iter().map(|s| s.store.marks()).fold(base, |a, b| Marks {
            regs: a.regs.max(b.regs),
            dims: a.dims.max(b.dims),
            nodes: a.nodes.max(b.nodes),
        });
        out.memory.resize(end.regs, MemCell::Unbound);
        out.lin.ensure_dims(end.dims);
        // fresh allocations: each snapshot owns the range past its predecessor
        let mut from = base;
        for snap in &locals {
            let to = snap.store.marks();
            out.memory[from.regs..to.regs].clone_from_slice(&snap.store.memory[from.regs..to.regs]);
            out.scopes
                .extend(snap.store.scopes[from.nodes..to.nodes].iter().cloned());
            from = to;
        }
        for snap in &locals {
            out.lin.absorb(&snap.store.lin);
            out.step_false |= snap.store.step_false;
        }
        // bindings made to pre-existing registers are unified pairwise
        for snap in &locals {
            for r in 0..base.regs {
                let cell = &snap.store.memory[r];
                if *cell != self.memory[r] {
                    out.merge_cell(r, cell.clone());
                }
            }
        }
        out
    }

    fn merge_cell(&mut self, r: Reg, cell: MemCell) {
        match cell {
            MemCell::Unbound => {}
            MemCell::Reference(t) => self.unify(r, t),
            cell => {
                let s = self.deref(r);
                if self.memory[s] == MemCell::Unbound {
                    if let MemCell::Functor(h) = cell {
                        if self.reaches(h, s) || self.reaches(h + 1, s) {
                            self.step_false = true;
                            return;
                        }
                    }
                    self.memory[s] = cell;
                } else {
                    // unify against a scratch register holding the value;
                    // nothing can come to reference it since it is bound
                    let tmp = self.alloc(cell);
                    self.unify(s, tmp);
                    self.memory.pop();
                }
            }
        }
    }

    // -- unification (tell mode) -------------------------------------------

    fn resolve(&self, scope: NodeId, t: &Term) -> Result<RTerm, StoreError> {
        Ok(match t {
            Term::Atom(a) => RTerm::Atom(Arc::from(a.as_str())),
            Term::Num(q) => RTerm::Num(q.clone()),
            Term::Var(v) => RTerm::Reg(self.lookup(scope, v)?),
            Term::Anon => RTerm::Anon,
            Term::Cons(h, tl) => RTerm::Cons(Box::new(self.resolve(scope, h)?), Box::new(self.resolve(scope, tl)?)),
        })
    }

    /// Allocates the structure for `t` and returns its register. A stream
    /// element takes three registers: functor, head and tail.
    fn build(&mut self, t: &RTerm) -> Reg {
        match t {
            RTerm::Reg(r) => *r,
            _ => {
                let r = self.alloc(MemCell::Unbound);
                self.fill(r, t);
                r
            }
        }
    }

    fn fill(&mut self, cell: Reg, t: &RTerm) {
        self.memory[cell] = match t {
            RTerm::Reg(r) => MemCell::Reference(*r),
            RTerm::Atom(a) => MemCell::Constant(Value::Atom(a.clone())),
            RTerm::Num(q) => MemCell::Constant(Value::Num(q.clone())),
            RTerm::Anon => MemCell::Unbound,
            RTerm::Cons(h, tl) => {
                let head = self.alloc(MemCell::Unbound);
                self.alloc(MemCell::Unbound);
                self.fill(head, h);
                self.fill(head + 1, tl);
                MemCell::Functor(head)
            }
        };
    }

    fn unify_term(&mut self, r: Reg, t: &RTerm) {
        let s = self.deref(r);
        match (t, self.memory[s].clone()) {
            (RTerm::Anon, _) => {}
            (RTerm::Reg(w), _) => self.unify(s, *w),
            (RTerm::Atom(a), MemCell::Unbound) => self.memory[s] = MemCell::Constant(Value::Atom(a.clone())),
            (RTerm::Num(q), MemCell::Unbound) => self.memory[s] = MemCell::Constant(Value::Num(q.clone())),
            (RTerm::Cons(..), MemCell::Unbound) => {
                // the variable's own cell becomes the functor
                self.fill(s, t);
                let MemCell::Functor(head) = self.memory[s] else {
                    unreachable!()
                };
                if self.reaches(head, s) || self.reaches(head + 1, s) {
                    self.memory[s] = MemCell::Unbound;
                    self.step_false = true;
                }
            }
            (RTerm::Atom(a), MemCell::Constant(Value::Atom(b))) if *a == b => {}
            (RTerm::Num(q), MemCell::Constant(Value::Num(p))) if *q == p => {}
            (RTerm::Num(q), MemCell::DiscreteVar(d)) => self.fix_dim(d, q.clone()),
            (RTerm::Cons(h, tl), MemCell::Functor(hr)) => {
                self.unify_term(hr, h);
                self.unify_term(hr + 1, tl);
            }
            _ => self.step_false = true,
        }
    }

    fn fix_dim(&mut self, d: usize, q: Rational) {
        self.lin
            .add(LinConstraint::fix(d, q))
            .expect("dimension allocated with its register");
    }

    fn unify(&mut self, a: Reg, b: Reg) {
        let (a, b) = (self.deref(a), self.deref(b));
        if a == b {
            return;
        }
        match (self.memory[a].clone(), self.memory[b].clone()) {
            (MemCell::Unbound, MemCell::Unbound) => {
                let (hi, lo) = if a > b { (a, b) } else { (b, a) };
                self.memory[hi] = MemCell::Reference(lo);
            }
            (MemCell::Unbound, _) => self.bind(a, b),
            (_, MemCell::Unbound) => self.bind(b, a),
            (MemCell::Constant(x), MemCell::Constant(y)) => {
                if x != y {
                    self.step_false = true;
                }
            }
            (MemCell::Constant(Value::Num(q)), MemCell::DiscreteVar(d))
            | (MemCell::DiscreteVar(d), MemCell::Constant(Value::Num(q))) => self.fix_dim(d, q),
            (MemCell::DiscreteVar(d1), MemCell::DiscreteVar(d2)) => {
                let c = LinConstraint::compare(&Affine::dim(d1), crate::ast::RelOp::Eq, &Affine::dim(d2));
                self.lin.add(c).expect("dimensions allocated with their registers");
            }
            (MemCell::Functor(h1), MemCell::Functor(h2)) => {
                self.unify(h1, h2);
                self.unify(h1 + 1, h2 + 1);
            }
            _ => self.step_false = true,
        }
    }

    fn bind(&mut self, var: Reg, target: Reg) {
        if self.reaches(target, var) {
            self.step_false = true;
        } else {
            self.memory[var] = MemCell::Reference(target);
        }
    }

    /// Occurs check: whether `target` is reachable from `from`.
    fn reaches(&self, from: Reg, target: Reg) -> bool {
        let mut stack = vec![from];
        let mut seen = HashSet::new();
        while let Some(r) = stack.pop() {
            let r = self.deref(r);
            if r == target {
                return true;
            }
            if !seen.insert(r) {
                continue;
            }
            if let MemCell::Functor(h) = self.memory[r] {
                stack.push(h);
                stack.push(h + 1);
            }
        }
        false
    }

    /// Linear view of an expression; `None` when a variable is bound to a
    /// non-numeric value. With `allocate`, unbound variables receive a
    /// dimension.
    fn affine(&mut self, scope: NodeId, e: &LinExpr, allocate: bool) -> Result<Option<Affine>, StoreError> {
        let mut out = Affine::constant(e.constant.clone());
        for (v, k) in &e.terms {
            let r = self.lookup(scope, v)?;
            match self.view().operand(r) {
                Operand::Dim(d) => out.add(d, k.clone()),
                Operand::Const(q) => out.constant += k * q,
                Operand::Fresh(s) => {
                    debug_assert!(allocate);
                    let d = self.lin.add_dim();
                    self.memory[s] = MemCell::DiscreteVar(d);
                    out.add(d, k.clone());
                }
                Operand::NonNumeric => return Ok(None),
            }
        }
        Ok(Some(out))
    }

    // -- rendering ------------------------------------------------------------

    /// Human-readable value of a register: streams as lists, numeric
    /// variables as their value when fixed, `#` otherwise.
    pub fn render(&self, reg: Reg) -> String {
        self.view().render(reg)
    }

    pub fn dump(&self) -> StoreDump {
        StoreDump {
            consistent: self.is_consistent(),
            scopes: self
                .scopes
                .iter()
                .map(|n| ScopeDump {
                    id: n.id,
                    parent: n.parent,
                    kind: match &n.kind {
                        ScopeKind::Root => "root".into(),
                        ScopeKind::ProcCall(p) => format!("call {}", p),
                        ScopeKind::Exists => "exists".into(),
                    },
                    symbols: n.symbols.iter().map(|(k, v)| (k.clone(), *v)).collect(),
                })
                .collect(),
            memory: self
                .memory
                .iter()
                .enumerate()
                .map(|(reg, c)| {
                    let (kind, data) = match c {
                        MemCell::Constant(v) => ("constant", v.to_string()),
                        MemCell::DiscreteVar(d) => ("var", format!("D_{}", d)),
                        MemCell::Reference(r) => ("ref", r.to_string()),
                        MemCell::Functor(h) => ("functor", h.to_string()),
                        MemCell::Unbound => ("unbound", String::new()),
                    };
                    CellDump {
                        reg,
                        kind: kind.into(),
                        data,
                    }
                })
                .collect(),
            dims: self.lin.dims(),
            lin: self.lin.constraints().map(|c| c.to_string()).collect(),
        }
    }
}

fn lookup_in(scopes: &[Arc<ScopeNode>], scope: NodeId, name: &str) -> Result<Reg, StoreError> {
    let mut node = scopes.get(scope).ok_or(StoreError::UnknownScope(scope))?;
    loop {
        if let Some(r) = node.symbols.get(name) {
            return Ok(*r);
        }
        if matches!(node.kind, ScopeKind::ProcCall(_)) {
            break;
        }
        match node.parent {
            Some(p) => node = &scopes[p],
            None => break,
        }
    }
    Err(StoreError::UnknownSymbol {
        name: name.to_string(),
        scope,
    })
}

/// Read-only access used by entailment. Registers past the end of
/// `memory` read as unbound.
struct View<'a> {
    scopes: &'a [Arc<ScopeNode>],
    memory: &'a [MemCell],
    lin: &'a LinStore,
    inconsistent: bool,
}

impl<'a> View<'a> {
    fn cell(&self, r: Reg) -> &'a MemCell {
        self.memory.get(r).unwrap_or(&MemCell::Unbound)
    }

    fn deref(&self, mut r: Reg) -> Reg {
        while let MemCell::Reference(t) = self.cell(r) {
            r = *t;
        }
        r
    }

    fn operand(&self, r: Reg) -> Operand {
        let s = self.deref(r);
        match self.cell(s) {
            MemCell::DiscreteVar(d) => Operand::Dim(*d),
            MemCell::Constant(Value::Num(q)) => Operand::Const(q.clone()),
            MemCell::Unbound => Operand::Fresh(s),
            _ => Operand::NonNumeric,
        }
    }

    fn entails(&self, scope: NodeId, c: &Constraint) -> Result<bool, StoreError> {
        // resolve names first so unknown symbols are reported even when the
        // store is inconsistent
        let resolved = match c {
            Constraint::True => return Ok(true),
            Constraint::StreamEq(v, t) => {
                let r = lookup_in(self.scopes, scope, v)?;
                Some((r, self.resolve(scope, t)?))
            }
            Constraint::Linear(l, _, r) => {
                for v in l.terms.keys().chain(r.terms.keys()) {
                    lookup_in(self.scopes, scope, v)?;
                }
                None
            }
        };
        if self.inconsistent {
            return Ok(true);
        }
        match (c, resolved) {
            (_, Some((r, t))) => Ok(self.matches(r, &t)),
            (Constraint::Linear(l, op, r), None) => {
                let mut lin = self.lin.clone();
                let mut fresh = HashMap::new();
                let (Some(lhs), Some(rhs)) = (
                    self.affine(scope, l, &mut lin, &mut fresh)?,
                    self.affine(scope, r, &mut lin, &mut fresh)?,
                ) else {
                    return Ok(false);
                };
                Ok(lin.entails(&LinConstraint::compare(&lhs, *op, &rhs))?)
            }
            _ => unreachable!(),
        }
    }

    fn resolve(&self, scope: NodeId, t: &Term) -> Result<RTerm, StoreError> {
        Ok(match t {
            Term::Atom(a) => RTerm::Atom(Arc::from(a.as_str())),
            Term::Num(q) => RTerm::Num(q.clone()),
            Term::Var(v) => RTerm::Reg(lookup_in(self.scopes, scope, v)?),
            Term::Anon => RTerm::Anon,
            Term::Cons(h, tl) => RTerm::Cons(Box::new(self.resolve(scope, h)?), Box::new(self.resolve(scope, tl)?)),
        })
    }

    fn affine(
        &self,
        scope: NodeId,
        e: &LinExpr,
        lin: &mut LinStore,
        fresh: &mut HashMap<Reg, usize>,
    ) -> Result<Option<Affine>, StoreError> {
        let mut out = Affine::constant(e.constant.clone());
        for (v, k) in &e.terms {
            let r = lookup_in(self.scopes, scope, v)?;
            match self.operand(r) {
                Operand::Dim(d) => out.add(d, k.clone()),
                Operand::Const(q) => out.constant += k * q,
                Operand::Fresh(s) => {
                    let d = *fresh.entry(s).or_insert_with(|| lin.add_dim());
                    out.add(d, k.clone());
                }
                Operand::NonNumeric => return Ok(None),
            }
        }
        Ok(Some(out))
    }

    fn num_equals(&self, d: usize, q: &Rational) -> bool {
        self.lin.entails(&LinConstraint::fix(d, q.clone())).unwrap_or(false)
    }

    /// Ask-mode matching: never binds.
    fn matches(&self, r: Reg, t: &RTerm) -> bool {
        let s = self.deref(r);
        match (t, self.cell(s)) {
            (RTerm::Anon, _) => true,
            (RTerm::Reg(w), _) => self.same(s, *w),
            (RTerm::Atom(a), MemCell::Constant(Value::Atom(b))) => a == b,
            (RTerm::Num(q), MemCell::Constant(Value::Num(p))) => q == p,
            (RTerm::Num(q), MemCell::DiscreteVar(d)) => self.num_equals(*d, q),
            (RTerm::Cons(h, tl), MemCell::Functor(hr)) => self.matches(*hr, h) && self.matches(hr + 1, tl),
            _ => false,
        }
    }

    fn same(&self, a: Reg, b: Reg) -> bool {
        let (a, b) = (self.deref(a), self.deref(b));
        if a == b {
            return true;
        }
        match (self.cell(a), self.cell(b)) {
            (MemCell::Constant(x), MemCell::Constant(y)) => x == y,
            (MemCell::Constant(Value::Num(q)), MemCell::DiscreteVar(d))
            | (MemCell::DiscreteVar(d), MemCell::Constant(Value::Num(q))) => self.num_equals(*d, q),
            (MemCell::DiscreteVar(d1), MemCell::DiscreteVar(d2)) => {
                let c = LinConstraint::compare(&Affine::dim(*d1), crate::ast::RelOp::Eq, &Affine::dim(*d2));
                self.lin.entails(&c).unwrap_or(false)
            }
            (MemCell::Functor(h1), MemCell::Functor(h2)) => self.same(*h1, *h2) && self.same(h1 + 1, h2 + 1),
            _ => false,
        }
    }

    fn render(&self, r: Reg) -> String {
        let s = self.deref(r);
        match self.cell(s) {
            MemCell::Unbound => "_".into(),
            MemCell::Constant(v) => v.to_string(),
            MemCell::DiscreteVar(d) => match self.lin.fixed_value(*d) {
                Some(q) => fmt_rational(&q),
                None => "#".into(),
            },
            MemCell::Functor(h) => format!("[{}|{}]", self.render(*h), self.render(h + 1)),
            MemCell::Reference(_) => unreachable!("dereferenced"),
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct ScopeDump {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub kind: String,
    pub symbols: Vec<(String, Reg)>,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct CellDump {
    pub reg: Reg,
    pub kind: String,
    pub data: String,
}

/// Structured store dump; the text form is its `Display`.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct StoreDump {
    pub consistent: bool,
    pub scopes: Vec<ScopeDump>,
    pub memory: Vec<CellDump>,
    pub dims: usize,
    pub lin: Vec<String>,
}

impl fmt::Display for StoreDump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "symbol table:")?;
        for n in &self.scopes {
            match n.parent {
                Some(p) => write!(f, "  N{} <- N{} [{}]", n.id, p, n.kind)?,
                None => write!(f, "  N{} [{}]", n.id, n.kind)?,
            }
            for (name, reg) in &n.symbols {
                write!(f, " {}:{}", name, reg)?;
            }
            writeln!(f)?;
        }
        writeln!(f, "memory:")?;
        for c in &self.memory {
            if c.data.is_empty() {
                writeln!(f, "  {:>4} {}", c.reg, c.kind)?;
            } else {
                writeln!(f, "  {:>4} {} {}", c.reg, c.kind, c.data)?;
            }
        }
        writeln!(f, "linear ({} dims):", self.dims)?;
        for c in &self.lin {
            writeln!(f, "  {}", c)?;
        }
        Ok(())
    }
}

impl fmt::Display for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.dump().fmt(f)
    }
}
