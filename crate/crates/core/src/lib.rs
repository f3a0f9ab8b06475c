//! Exact Boolean MPE (most probable explanation) on XOR-CNF formulas.
//!
//! The solver runs in two phases. [`planner`] builds a project-join tree
//! from an elimination order; [`executor`] valuates the tree bottom-up with
//! algebraic decision diagrams ([`diagram`]), pushing a derivative sign for
//! every projected variable, and then pops the signs to rebuild a maximizing
//! assignment.

pub mod benchgen;
pub mod diagram;
pub mod executor;
pub mod formula;
pub mod oracle;
pub mod planner;
pub mod wcnf;
