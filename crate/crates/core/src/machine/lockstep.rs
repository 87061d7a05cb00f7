//! Runs the uncached and cached machines side by side and compares their
//! observable state, with every pointer cache hidden, after each step.

use serde::Serialize;

use crate::ir::Program;

use super::exec::Observation;
use super::m1::M1Config;
use super::{m0, m1, Oracle, RunConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Divergence {
    /// Number of steps both machines had taken when the states differed.
    pub step: usize,
    /// Which part of the state differs first: `pc`, `status`, `regs`, `mem` or `borrows`.
    pub component: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiffReport {
    pub steps: usize,
    pub divergence: Option<Divergence>,
    /// True when both runs stopped at the step limit without diverging.
    pub truncated: bool,
}

impl DiffReport {
    pub fn equivalent(&self) -> bool {
        self.divergence.is_none()
    }
}

fn first_difference(a: &Observation, b: &Observation) -> Option<(&'static str, String)> {
    if a.status != b.status {
        return Some(("status", format!("{:?} vs {:?}", a.status, b.status)));
    }
    if a.pc != b.pc {
        return Some(("pc", format!("{:?} vs {:?}", a.pc, b.pc)));
    }
    if a.regs != b.regs {
        let keys = a.regs.keys().chain(b.regs.keys());
        for k in keys {
            if a.regs.get(k) != b.regs.get(k) {
                return Some(("regs", format!("{k}: {:?} vs {:?}", a.regs.get(k), b.regs.get(k))));
            }
        }
    }
    if a.mem != b.mem {
        for k in a.mem.keys().chain(b.mem.keys()) {
            if a.mem.get(k) != b.mem.get(k) {
                return Some(("mem", format!("{k:#x}: {:?} vs {:?}", a.mem.get(k), b.mem.get(k))));
            }
        }
    }
    if a.borrows != b.borrows {
        return Some(("borrows", format!("{:?} vs {:?}", a.borrows, b.borrows)));
    }
    None
}

pub fn lockstep_diff(program: &Program, oracle: &Oracle, m1_config: M1Config, config: RunConfig) -> DiffReport {
    let config = RunConfig { record_trace: false, ..config };
    let mut a = m0::machine(program, oracle.clone(), config);
    let mut b = m1::machine(program, oracle.clone(), m1_config, config);
    let mut steps = 0;
    loop {
        if let Some((component, detail)) = first_difference(&a.observe(), &b.observe()) {
            return DiffReport { steps, divergence: Some(Divergence { step: steps, component, detail }), truncated: false };
        }
        if !a.is_running() {
            return DiffReport { steps, divergence: None, truncated: false };
        }
        if steps >= config.step_limit {
            return DiffReport { steps, divergence: None, truncated: true };
        }
        a.step();
        b.step();
        steps += 1;
    }
}
