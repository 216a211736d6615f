//! Agent interpreter and synchronous step engine.
//!
//! Every time instant takes a snapshot of the store per active thread,
//! executes the thread on it and merges the snapshots. Guards and `now`
//! conditions always read the store as it was when the instant began, so
//! a tell becomes observable one instant after it is executed.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ast::{pretty_agent, Agent, Program};
use crate::store::{NodeId, Reg, ScopeKind, Store, StoreDump, StoreError, ROOT};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("call to undeclared procedure {0}/{1}")]
    UnknownProcedure(String, usize),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChoicePolicy {
    First,
    Last,
    Random(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Quiescent,
    Failed,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Running => "running",
            Status::Quiescent => "quiescent",
            Status::Failed => "failed",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Thread {
    pub agent: Agent,
    pub scope: NodeId,
}

#[derive(Clone, Debug)]
pub struct Config {
    pub active: Vec<Thread>,
    pub store: Store,
    pub clock: u64,
    pub status: Status,
}

impl Config {
    /// Initial configuration for the program's entry agent. Free variables
    /// of the entry are declared in the root scope in order of first
    /// occurrence.
    pub fn initial(program: &Program) -> Result<(Config, Vec<(String, Reg)>), RunError> {
        let mut store = Store::new();
        let mut vars = Vec::new();
        for v in program.entry.free_vars() {
            let r = store.add_variable(ROOT, &v)?;
            vars.push((v, r));
        }
        let active = program
            .entry
            .clone()
            .flatten_parallel()
            .into_iter()
            .filter(|a| *a != Agent::Skip)
            .map(|agent| Thread { agent, scope: ROOT })
            .collect();
        let cfg = Config {
            active,
            store,
            clock: 0,
            status: Status::Running,
        };
        Ok((cfg, vars))
    }
}

/// Runs agents of a fixed program under a choice policy.
pub struct Interpreter<'p> {
    program: &'p Program,
    policy: ChoicePolicy,
    rng: ChaCha8Rng,
}

impl<'p> Interpreter<'p> {
    pub fn new(program: &'p Program, policy: ChoicePolicy) -> Self {
        let seed = match policy {
            ChoicePolicy::Random(s) => s,
            _ => 0,
        };
        Interpreter {
            program,
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn pick(&mut self, n: usize) -> usize {
        match self.policy {
            ChoicePolicy::First => 0,
            ChoicePolicy::Last => n - 1,
            ChoicePolicy::Random(_) => self.rng.gen_range(0..n),
        }
    }

    /// Executes one thread for the current instant on `local`, pushing the
    /// threads to run next. Returns whether the thread made a transition;
    /// a suspended choice does not.
    pub fn execute(
        &mut self,
        pre: &Store,
        thread: Thread,
        local: &mut Store,
        next: &mut Vec<Thread>,
    ) -> Result<bool, RunError> {
        let Thread { agent, scope } = thread;
        match agent {
            Agent::Skip => Ok(false),
            Agent::Tell(c) => {
                local.add_constraint(scope, &c)?;
                Ok(true)
            }
            Agent::Parallel(..) => {
                let base = local.clone();
                let mut snaps: Vec<crate::store::Snapshot> = Vec::new();
                let mut moved = false;
                for a in agent.flatten_parallel() {
                    let mut snap = match snaps.last() {
                        Some(prev) => base.snapshot_after(prev),
                        None => base.snapshot(),
                    };
                    moved |= self.execute(pre, Thread { agent: a, scope }, snap.store_mut(), next)?;
                    snaps.push(snap);
                }
                *local = base.merge(snaps);
                Ok(moved)
            }
            Agent::Choice(branches) => {
                let mut enabled = Vec::new();
                for (i, b) in branches.iter().enumerate() {
                    if pre.entails_from(local, scope, &b.guard)? {
                        enabled.push(i);
                    }
                }
                if enabled.is_empty() {
                    next.push(Thread {
                        agent: Agent::Choice(branches),
                        scope,
                    });
                    return Ok(false);
                }
                let k = enabled[self.pick(enabled.len())];
                let body = branches.into_iter().nth(k).expect("enabled branch").body;
                push_threads(next, body, scope);
                Ok(true)
            }
            Agent::Now(c, a, b) => {
                let branch = if pre.entails_from(local, scope, &c)? { *a } else { *b };
                self.execute(pre, Thread { agent: branch, scope }, local, next)?;
                Ok(true)
            }
            Agent::Exists(vars, body) => {
                let node = local.new_scope(scope, ScopeKind::Exists)?;
                for v in &vars {
                    local.add_variable(node, v)?;
                }
                self.execute(
                    pre,
                    Thread {
                        agent: *body,
                        scope: node,
                    },
                    local,
                    next,
                )
            }
            Agent::Call(name, args) => {
                let decl = self
                    .program
                    .decl(&name)
                    .filter(|d| d.formals.len() == args.len())
                    .ok_or_else(|| RunError::UnknownProcedure(name.clone(), args.len()))?;
                let node = local.new_scope(scope, ScopeKind::ProcCall(name.clone()))?;
                for (formal, actual) in decl.formals.iter().zip(&args) {
                    local.add_parameter(node, formal, actual, scope)?;
                }
                push_threads(next, decl.body.clone(), node);
                Ok(true)
            }
        }
    }

    /// Advances `cfg` by one time instant. Returns `None` when no thread
    /// can make a transition.
    pub fn step(&mut self, cfg: &Config) -> Result<Option<Config>, RunError> {
        if cfg.status != Status::Running {
            return Ok(None);
        }
        let pre = &cfg.store;
        let mut snaps: Vec<crate::store::Snapshot> = Vec::with_capacity(cfg.active.len());
        let mut next = Vec::new();
        let mut moved = false;
        for t in &cfg.active {
            let mut snap = match snaps.last() {
                Some(prev) => pre.snapshot_after(prev),
                None => pre.snapshot(),
            };
            moved |= self.execute(pre, t.clone(), snap.store_mut(), &mut next)?;
            snaps.push(snap);
        }
        if !moved {
            return Ok(None);
        }
        let store = pre.merge(snaps);
        let status = if store.is_consistent() {
            Status::Running
        } else {
            Status::Failed
        };
        Ok(Some(Config {
            active: next,
            store,
            clock: cfg.clock + 1,
            status,
        }))
    }
}

fn push_threads(next: &mut Vec<Thread>, agent: Agent, scope: NodeId) {
    for a in agent.flatten_parallel() {
        if a != Agent::Skip {
            next.push(Thread { agent: a, scope });
        }
    }
}

#[derive(Clone, Debug)]
pub struct TraceElement {
    pub clock: u64,
    pub status: Status,
    pub active: Vec<Thread>,
    pub store: Store,
}

impl TraceElement {
    pub fn dump(&self) -> ElementDump {
        ElementDump {
            clock: self.clock,
            status: self.status,
            active: self.active.iter().map(|t| pretty_agent(&t.agent)).collect(),
            store: self.store.dump(),
        }
    }
}

/// Serialisable form of one trace element, one jsonl line.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct ElementDump {
    pub clock: u64,
    pub status: Status,
    pub active: Vec<String>,
    pub store: StoreDump,
}

impl fmt::Display for ElementDump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "== instant {} ({}) ==", self.clock, self.status)?;
        writeln!(f, "active:")?;
        for a in &self.active {
            writeln!(f, "  {}", a)?;
        }
        write!(f, "{}", self.store)
    }
}

/// Sequence of configurations c0 c1 ... cn of one run.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Entry variables and their registers in the root scope.
    pub entry_vars: Vec<(String, Reg)>,
    pub elements: Vec<TraceElement>,
}

impl Trace {
    pub fn last(&self) -> &TraceElement {
        self.elements.last().expect("a trace has at least c0")
    }

    pub fn status(&self) -> Status {
        self.last().status
    }

    pub fn final_store(&self) -> &Store {
        &self.last().store
    }
}

/// Runs `program` for at most `steps` instants.
pub fn run(program: &Program, steps: usize, policy: ChoicePolicy) -> Result<Trace, RunError> {
    let mut elements = Vec::new();
    let entry_vars = run_with(program, steps, policy, |cfg| {
        elements.push(TraceElement {
            clock: cfg.clock,
            status: cfg.status,
            active: cfg.active.clone(),
            store: cfg.store.clone(),
        })
    })?;
    Ok(Trace { entry_vars, elements })
}

/// Runs `program` and hands every configuration to `observe`. When nothing
/// can move, the last configuration is reported with status quiescent.
pub fn run_with(
    program: &Program,
    steps: usize,
    policy: ChoicePolicy,
    mut observe: impl FnMut(&Config),
) -> Result<Vec<(String, Reg)>, RunError> {
    let (mut cfg, vars) = Config::initial(program)?;
    let mut interp = Interpreter::new(program, policy);
    for _ in 0..steps {
        match interp.step(&cfg)? {
            Some(next) => {
                observe(&cfg);
                cfg = next;
                if cfg.status == Status::Failed {
                    break;
                }
            }
            None => {
                cfg.status = Status::Quiescent;
                break;
            }
        }
    }
    observe(&cfg);
    Ok(vars)
}
