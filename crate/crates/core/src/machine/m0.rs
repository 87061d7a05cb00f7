//! The uncached reference machine: memory plus borrow stacks, no pointer cache.
//!
//! At level M2 pointers still carry the programmer-managed summary written by
//! `set_cache`; it is ghost state here and never consulted by loads.

use crate::ir::Program;

use super::m1::M1Config;
use super::{Machine, Oracle, Outcome, RunConfig, RunError};

pub fn machine(program: &Program, oracle: Oracle, config: RunConfig) -> Machine<'_> {
    Machine::new(program, oracle, false, M1Config::default(), config)
}

/// Runs to completion. Deterministic in `(program, oracle)`.
pub fn run(program: &Program, oracle: Oracle, config: RunConfig) -> Result<Outcome, RunError> {
    machine(program, oracle, config).run()
}
