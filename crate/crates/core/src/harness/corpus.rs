//! Seeded corpora of generated programs checked for cache equivalence, lockstep
//! agreement and (optionally) three-way verdict agreement.

use rayon::prelude::*;
use serde::Serialize;

use crate::ir::{Level, Program};
use crate::machine::lockstep::{lockstep_diff, Divergence};
use crate::machine::RunConfig;
use crate::text::print;

use super::check::{
    cache_violation, enumerate_oracles, exhaustive_verdict, gen_checked, shrink, three_way_check, CheckConfig,
    Concrete, ThreeWay,
};
use super::gen::GenConfig;

/// Program for one corpus seed. With no level, even seeds are M1 and odd seeds M2.
pub fn corpus_program(seed: u64, level: Option<Level>, width: u32) -> Program {
    let level = level.unwrap_or(if seed % 2 == 0 { Level::M1 } else { Level::M2 });
    gen_checked(&GenConfig { seed, level, width, ..GenConfig::default() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Failure {
    CacheViolation { oracle: Vec<u64>, step: usize, register: String },
    Divergence { oracle: Vec<u64>, divergence: Divergence },
    Disagreement(ThreeWay),
    Error(String),
}

impl Failure {
    pub fn summary(&self) -> String {
        match self {
            Failure::CacheViolation { oracle, step, register } => {
                format!("cache of {register} differs from memory at step {step} (oracle {oracle:?})")
            }
            Failure::Divergence { oracle, divergence: d } => {
                format!("machines diverge at step {} in {}: {} (oracle {oracle:?})", d.step, d.component, d.detail)
            }
            Failure::Disagreement(t) => format!(
                "verdicts disagree: concrete {}, ownsem {}, baseline {}",
                if matches!(t.concrete, Concrete::Valid) { "valid" } else { "invalid" },
                t.ownsem.result,
                t.baseline.result
            ),
            Failure::Error(e) => e.clone(),
        }
    }
}

/// Machine-level checks: cache equivalence over every oracle (M1 programs only;
/// at M2 the cache holds programmer data), then lockstep on a spread of oracles.
pub fn machine_failure(program: &Program, config: &CheckConfig) -> Option<Failure> {
    let oracles = match enumerate_oracles(program) {
        Ok(o) => o,
        Err(e) => return Some(Failure::Error(e.to_string())),
    };
    if program.level == Level::M1 {
        if let Some((oracle, step, register)) = cache_violation(program, &oracles, config.m1) {
            return Some(Failure::CacheViolation { oracle, step, register });
        }
    }
    let stride = (oracles.len() / config.lockstep_samples.max(1)).max(1);
    oracles.par_iter().step_by(stride).find_map_first(|o| {
        lockstep_diff(program, o, config.m1, RunConfig::default())
            .divergence
            .map(|divergence| Failure::Divergence { oracle: o.values.clone(), divergence })
    })
}

/// All checks for one program; `full` adds the solver verdicts.
pub fn check_program(program: &Program, config: &CheckConfig, full: bool) -> Option<Failure> {
    if let Some(f) = machine_failure(program, config) {
        return Some(f);
    }
    if !full {
        return None;
    }
    match three_way_check(program, config) {
        Ok(t) if t.agree() => None,
        Ok(t) => Some(Failure::Disagreement(t)),
        Err(e) => Some(Failure::Error(e.to_string())),
    }
}

/// Smallest program found that still shows the same kind of failure.
pub fn reproducer(program: &Program, failure: &Failure, config: &CheckConfig) -> Program {
    let defined = |c: &Program| exhaustive_verdict(c).is_ok();
    match failure {
        Failure::CacheViolation { .. } | Failure::Divergence { .. } => {
            shrink(program, |c| defined(c) && machine_failure(c, config).is_some_and(|f| !matches!(f, Failure::Error(_))))
        }
        Failure::Disagreement(_) => shrink(program, |c| {
            defined(c) && matches!(three_way_check(c, config), Ok(t) if !t.agree())
        }),
        Failure::Error(_) => program.clone(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Finding {
    pub seed: u64,
    pub failure: Failure,
    pub summary: String,
    pub reproducer: String,
    pub reproducer_instrs: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CorpusReport {
    pub checked: usize,
    pub findings: Vec<Finding>,
}

#[derive(Debug, Clone)]
pub struct CorpusOptions {
    pub level: Option<Level>,
    pub width: u32,
    pub full: bool,
    /// Shrink at most this many findings.
    pub shrink_limit: usize,
    pub check: CheckConfig,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions { level: None, width: 4, full: false, shrink_limit: 3, check: CheckConfig::default() }
    }
}

/// Checks seeds `start..start + count` in parallel.
pub fn run_corpus(start: u64, count: u64, opts: &CorpusOptions) -> CorpusReport {
    let mut failures: Vec<(u64, Program, Failure)> = (start..start + count)
        .into_par_iter()
        .filter_map(|seed| {
            let p = corpus_program(seed, opts.level, opts.width);
            check_program(&p, &opts.check, opts.full).map(|f| (seed, p, f))
        })
        .collect();
    failures.sort_by_key(|(s, _, _)| *s);
    let findings = failures
        .into_iter()
        .enumerate()
        .map(|(i, (seed, p, failure))| {
            let small = if i < opts.shrink_limit { reproducer(&p, &failure, &opts.check) } else { p };
            Finding {
                seed,
                summary: failure.summary(),
                failure,
                reproducer: print(&small),
                reproducer_instrs: small.instr_count(),
            }
        })
        .collect();
    CorpusReport { checked: count as usize, findings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::m1::{Fault, M1Config};

    #[test]
    fn clean_corpus_has_no_findings() {
        let r = run_corpus(0, 20, &CorpusOptions::default());
        assert_eq!(r.checked, 20);
        assert!(r.findings.is_empty(), "{:?}", r.findings.first().map(|f| &f.summary));
    }

    #[test]
    fn skipped_cache_sync_is_caught_and_shrunk() {
        let mut opts = CorpusOptions { level: Some(Level::M1), shrink_limit: 1, ..CorpusOptions::default() };
        opts.check.m1 = M1Config { fault: Some(Fault::SkipStoreCacheSync), ..M1Config::default() };
        let r = run_corpus(0, 40, &opts);
        let first = r.findings.first().expect("fault goes unnoticed");
        assert!(first.reproducer_instrs <= 15, "{}", first.reproducer);
    }
}
