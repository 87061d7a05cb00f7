//! The cached machine. Pointers carry a cache of the word they point to; loads
//! through a top-of-stack owned or mutably borrowed pointer return the cache
//! without touching memory.

use serde::Serialize;

use crate::ir::Program;

use super::borrow::PtrKind;
use super::{MemCell, Machine, Oracle, Outcome, RunConfig, RunError, Value};

/// Deliberate defects for negative-control runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Fault {
    /// Stores write memory but leave pointer caches untouched.
    SkipStoreCacheSync,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct M1Config {
    /// When false every load reads memory; caches are still maintained.
    pub serve_from_cache: bool,
    pub fault: Option<Fault>,
}

impl Default for M1Config {
    fn default() -> Self {
        M1Config { serve_from_cache: true, fault: None }
    }
}

pub fn machine<'p>(program: &'p Program, oracle: Oracle, m1: M1Config, config: RunConfig) -> Machine<'p> {
    Machine::new(program, oracle, true, m1, config)
}

pub fn run(program: &Program, oracle: Oracle, m1: M1Config, config: RunConfig) -> Result<Outcome, RunError> {
    machine(program, oracle, m1, config).run()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum CacheCheck {
    Holds,
    Violation { register: String, cache: String, memory: String },
}

/// Every register holding a top-of-stack owned or mutably borrowed pointer has a cache
/// equal to the memory word it points at. Pointers flagged stale are skipped.
pub fn check_cache_equivalence(m: &Machine<'_>) -> CacheCheck {
    for (reg, value) in m.registers() {
        let Value::Ptr(p) = value else { continue };
        if p.stale {
            continue;
        }
        let Some(access) = m.borrows().lookup(p.addr, p.tag) else { continue };
        if !access.was_top || !matches!(access.kind, PtrKind::O | PtrKind::Mb) {
            continue;
        }
        let mem = m.memory().get(&p.addr).copied().map(MemCell::as_cache);
        if mem != p.cache {
            let show = |c: Option<super::CacheVal>| c.map_or("uninit".to_string(), |c| c.to_string());
            return CacheCheck::Violation { register: reg.to_string(), cache: show(p.cache), memory: show(mem) };
        }
    }
    CacheCheck::Holds
}

/// Runs to completion, checking the cache invariant before the first and after every step.
/// Returns the outcome and the first violation with its step number, if any.
pub fn run_checked(
    program: &Program,
    oracle: Oracle,
    m1: M1Config,
    config: RunConfig,
) -> Result<(Outcome, Option<(usize, CacheCheck)>), RunError> {
    let mut m = machine(program, oracle, m1, config);
    let mut violation = None;
    loop {
        if violation.is_none() {
            let c = check_cache_equivalence(&m);
            if c != CacheCheck::Holds {
                violation = Some((m.stats().steps, c));
            }
        }
        if !m.is_running() {
            break;
        }
        if m.stats().steps >= config.step_limit {
            return Err(RunError::StepLimitExceeded(config.step_limit));
        }
        m.step();
    }
    Ok((m.into_outcome(), violation))
}
