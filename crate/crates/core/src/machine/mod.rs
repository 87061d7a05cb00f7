//! Concrete reference machines.
//!
//! [`m0`] runs programs against an address map and per-allocation borrow stacks and
//! reports undefined behavior as a terminal status. [`m1`] adds the pointer cache and
//! serves loads from it whenever the borrow stack proves the cache is current.
//! [`lockstep`] runs both side by side and compares what they expose.

pub mod borrow;
mod exec;
pub mod lockstep;
pub mod m0;
pub mod m1;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ir::Loc;

pub use borrow::{BorrowStack, BorrowStore, PtrKind, Tag};
pub use exec::{Machine, Observation};

/// First allocation address.
pub const FIRST_ADDR: u64 = 0x4;
pub const DEFAULT_STEP_LIMIT: usize = 100_000;

/// What a pointer cache (or a memory cell) can hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CacheVal {
    Word(u64),
    /// A pointer with its own cache stripped.
    Ptr { addr: u64, tag: Tag },
}

impl fmt::Display for CacheVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CacheVal::Word(v) => write!(f, "{v}"),
            CacheVal::Ptr { addr, tag } => write!(f, "({addr:#x},{tag})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct FatPtr {
    pub addr: u64,
    pub tag: Tag,
    pub cache: Option<CacheVal>,
    /// Set when the cache was filled from an untrusted source.
    pub stale: bool,
}

impl fmt::Display for FatPtr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.cache, self.stale) {
            (Some(c), false) => write!(f, "({:#x},{},{c})", self.addr, self.tag),
            (Some(c), true) => write!(f, "({:#x},{},{c}?)", self.addr, self.tag),
            (None, _) => write!(f, "({:#x},{})", self.addr, self.tag),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Value {
    Word(u64),
    Ptr(FatPtr),
    /// A memory register names a version of the single global memory.
    Mem(u64),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Word(v) => write!(f, "{v}"),
            Value::Ptr(p) => write!(f, "{p}"),
            Value::Mem(v) => write!(f, "mem#{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MemCell {
    Word(u64),
    /// A stored pointer; `cache` is only written when a borrow of it dies.
    Ptr { addr: u64, tag: Tag, cache: Option<u64> },
}

impl MemCell {
    pub fn as_cache(self) -> CacheVal {
        match self {
            MemCell::Word(v) => CacheVal::Word(v),
            MemCell::Ptr { addr, tag, .. } => CacheVal::Ptr { addr, tag },
        }
    }
}

impl fmt::Display for MemCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemCell::Word(v) => write!(f, "{v}"),
            MemCell::Ptr { addr, tag, .. } => write!(f, "({addr:#x},{tag})"),
        }
    }
}

/// Values for `nondet` instructions.
///
/// Slot `k` feeds the `k`-th static nondet site (see [`crate::ir::nondet_sites`]);
/// sites executed more than once (loops) draw from slots past the last site in
/// execution order. Missing slots read as zero; values are masked to the site width.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Oracle {
    pub values: Vec<u64>,
}

impl Oracle {
    pub fn new(values: Vec<u64>) -> Oracle {
        Oracle { values }
    }

    pub fn get(&self, slot: usize) -> u64 {
        self.values.get(slot).copied().unwrap_or(0)
    }
}

impl From<Vec<u64>> for Oracle {
    fn from(values: Vec<u64>) -> Self {
        Oracle { values }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Status {
    Running,
    Halted,
    AssertFailed(Loc),
    AssumeInfeasible(Loc),
    Ub { rule: &'static str, loc: Loc },
}

impl Status {
    pub fn verdict(&self) -> Verdict {
        match self {
            Status::Running | Status::Halted => Verdict::Pass,
            Status::AssertFailed(_) => Verdict::AssertFail,
            Status::AssumeInfeasible(_) => Verdict::AssumeInfeasible,
            Status::Ub { rule, .. } => Verdict::Ub(rule),
        }
    }
}

/// Location-free summary of how a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    Pass,
    AssertFail,
    AssumeInfeasible,
    Ub(&'static str),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => f.write_str("pass"),
            Verdict::AssertFail => f.write_str("assert-fail"),
            Verdict::AssumeInfeasible => f.write_str("assume-infeasible"),
            Verdict::Ub(rule) => write!(f, "ub({rule})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub loc: Loc,
    pub instr: String,
    pub delta: String,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {} ; {}", self.step, self.instr, self.delta)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub steps: usize,
    pub mem_reads: usize,
    pub mem_writes: usize,
    pub cache_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Outcome {
    pub status: Status,
    /// Final register bindings in definition order.
    pub registers: Vec<(String, Value)>,
    pub trace: Vec<TraceStep>,
    pub stats: Stats,
}

impl Outcome {
    pub fn verdict(&self) -> Verdict {
        self.status.verdict()
    }

    pub fn register(&self, name: &str) -> Option<Value> {
        self.registers.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("step limit of {0} exceeded")]
    StepLimitExceeded(usize),
}

/// Knobs shared by both machines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub step_limit: usize,
    pub record_trace: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { step_limit: DEFAULT_STEP_LIMIT, record_trace: false }
    }
}
