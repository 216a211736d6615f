//! Simulator for the Timed Concurrent Constraint language (tccp).
//!
//! Programs are parsed into [`ast`] values and executed by the
//! [`interpreter`] on the abstract machine [`store`]: a symbol-table tree,
//! a register memory and a [`linear`] constraint store. [`oracle`] is an
//! independent rule-by-rule reference interpreter used for differential
//! testing.

pub mod ast;
pub mod interpreter;
pub mod linear;
pub mod observe;
pub mod oracle;
pub mod parser;
pub mod store;

pub use ast::{Agent, Arg, Branch, Constraint, Declaration, LinExpr, Program, RelOp, Term};
pub use parser::{parse_agent, parse_constraint, parse_program, with_entry, ParseError};
