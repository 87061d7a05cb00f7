//! Exhaustive concrete checking and agreement with the solver verdicts.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ir::{flatten, nondet_sites, validate, FlattenError, Instr, Loc, Program};
use crate::machine::lockstep::{lockstep_diff, Divergence};
use crate::machine::m1::{self, CacheCheck, M1Config};
use crate::machine::{m0, Oracle, RunConfig, RunError, Verdict};
use crate::smt::{solve, to_smtlib, ModelValue, SatResult, SolveError, SolverConfig};
use crate::vcgen::{encode, Encoding, VcError};

use super::gen::{gen_program, GenConfig};

/// Largest oracle space enumerated, in bits.
pub const MAX_ENUM_BITS: u32 = 20;
/// Oracles per program on which the two machines are compared step by step.
pub const LOCKSTEP_SAMPLES: usize = 48;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("oracle space of {0} bits exceeds the {MAX_ENUM_BITS}-bit enumeration limit")]
    EnumerationTooLarge(u32),
    #[error("program has undefined behavior ({rule}) under oracle {oracle:?}")]
    Ub { rule: &'static str, oracle: Vec<u64> },
    #[error(transparent)]
    Flatten(#[from] FlattenError),
    #[error(transparent)]
    Vc(#[from] VcError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("emitted script is ill-sorted: {0}")]
    Sort(#[from] crate::smt::SortError),
}

/// Bit widths of the nondet sites in site order.
pub fn site_widths(program: &Program) -> Vec<u32> {
    let sites = nondet_sites(program);
    let mut v: Vec<(usize, u32)> = sites
        .iter()
        .map(|(loc, &k)| match &program.blocks[loc.block].body[match loc.pos {
            crate::ir::Pos::Body(i) => i,
            _ => unreachable!("nondet sites are body statements"),
        }]
        .instr
        {
            Instr::Nondet { bits, .. } => (k, (*bits).min(program.width)),
            _ => unreachable!("site is a nondet"),
        })
        .collect();
    v.sort();
    v.into_iter().map(|(_, b)| b).collect()
}

/// Every oracle for an acyclic program, in lexicographic order (first site slowest).
pub fn enumerate_oracles(program: &Program) -> Result<Vec<Oracle>, CheckError> {
    let widths = site_widths(program);
    let bits: u32 = widths.iter().sum();
    if bits > MAX_ENUM_BITS {
        return Err(CheckError::EnumerationTooLarge(bits));
    }
    let total = 1u64 << bits;
    Ok((0..total)
        .map(|mut n| {
            let mut vals = vec![0; widths.len()];
            for (k, w) in widths.iter().enumerate().rev() {
                vals[k] = n & ((1 << w) - 1);
                n >>= w;
            }
            Oracle::new(vals)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Concrete {
    Valid,
    /// The first oracle (in enumeration order) that reaches a failing assertion.
    Invalid(Oracle),
}

/// Runs M0 under every oracle. Undefined behavior under any oracle is an error.
pub fn exhaustive_verdict(program: &Program) -> Result<Concrete, CheckError> {
    let oracles = enumerate_oracles(program)?;
    let cfg = RunConfig::default();
    let results: Vec<Result<Verdict, RunError>> = oracles
        .par_iter()
        .map(|o| m0::run(program, o.clone(), cfg).map(|out| out.verdict()))
        .collect();
    let mut failing = None;
    for (o, r) in oracles.iter().zip(results) {
        match r? {
            Verdict::Ub(rule) => return Err(CheckError::Ub { rule, oracle: o.values.clone() }),
            Verdict::AssertFail if failing.is_none() => failing = Some(o.clone()),
            _ => {}
        }
    }
    Ok(failing.map_or(Concrete::Valid, Concrete::Invalid))
}

/// Spread-out subset of `oracles`, always including the first and last.
fn sample(oracles: &[Oracle], n: usize) -> Vec<Oracle> {
    if oracles.len() <= n {
        return oracles.to_vec();
    }
    let step = (oracles.len() - 1) as f64 / (n - 1) as f64;
    (0..n).map(|i| oracles[(i as f64 * step).round() as usize].clone()).collect()
}

/// Oracle holding the nondet values of a model.
pub fn model_oracle(model: &BTreeMap<String, ModelValue>, sites: usize) -> Oracle {
    Oracle::new(
        (0..sites)
            .map(|k| match model.get(&format!("nd_{k}")) {
                Some(ModelValue::Bv { value, .. }) => *value,
                Some(ModelValue::Bool(b)) => u64::from(*b),
                _ => 0,
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverVerdict {
    pub result: String,
    pub reads: usize,
    pub writes: usize,
    /// For sat results: whether the model's oracle makes M0 fail an assertion.
    pub replays: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreeWay {
    pub concrete: Concrete,
    /// First lockstep divergence found, with the oracle that produced it.
    pub divergence: Option<(Vec<u64>, Divergence)>,
    pub ownsem: SolverVerdict,
    pub baseline: SolverVerdict,
}

impl ThreeWay {
    pub fn agree(&self) -> bool {
        let valid = matches!(self.concrete, Concrete::Valid);
        let ok = |v: &SolverVerdict| {
            (valid && v.result == "unsat") || (!valid && v.result == "sat" && v.replays == Some(true))
        };
        self.divergence.is_none() && ok(&self.ownsem) && ok(&self.baseline)
    }
}

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub solver: SolverConfig,
    pub m1: M1Config,
    pub lockstep_samples: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { solver: SolverConfig::from_env(), m1: M1Config::default(), lockstep_samples: LOCKSTEP_SAMPLES }
    }
}

fn solver_verdict(
    program: &Program,
    flat: &Program,
    encoding: Encoding,
    solver: &SolverConfig,
) -> Result<SolverVerdict, CheckError> {
    let script = encode(flat, encoding)?;
    let (reads, writes) = script.count_array_ops();
    let reply = solve(&to_smtlib(&script)?, solver)?;
    let replays = match &reply.result {
        SatResult::Sat(model) => {
            let oracle = model_oracle(model, nondet_sites(program).len());
            let out = m0::run(program, oracle, RunConfig::default())?;
            Some(out.verdict() == Verdict::AssertFail)
        }
        _ => None,
    };
    Ok(SolverVerdict { result: reply.result.name().to_string(), reads, writes, replays })
}

/// Exhaustive concrete verdict, M0/M1 lockstep on sampled oracles, and solver
/// verdicts for both encodings of the flattened program.
pub fn three_way_check(program: &Program, config: &CheckConfig) -> Result<ThreeWay, CheckError> {
    let concrete = exhaustive_verdict(program)?;
    let oracles = enumerate_oracles(program)?;
    let mut picked = sample(&oracles, config.lockstep_samples);
    if let Concrete::Invalid(o) = &concrete {
        picked.push(o.clone());
    }
    let divergence = picked.par_iter().find_map_first(|o| {
        let report = lockstep_diff(program, o, config.m1, RunConfig::default());
        report.divergence.map(|d| (o.values.clone(), d))
    });
    let flat = flatten(program)?;
    let ownsem = solver_verdict(program, &flat, Encoding::Ownsem, &config.solver)?;
    let baseline = solver_verdict(program, &flat, Encoding::Baseline, &config.solver)?;
    Ok(ThreeWay { concrete, divergence, ownsem, baseline })
}

/// First cache-equivalence violation over the given oracles: `(oracle, step, register)`.
pub fn cache_violation(program: &Program, oracles: &[Oracle], m1: M1Config) -> Option<(Vec<u64>, usize, String)> {
    oracles.par_iter().find_map_first(|o| match m1::run_checked(program, o.clone(), m1, RunConfig::default()) {
        Ok((_, Some((step, CacheCheck::Violation { register, .. })))) => Some((o.values.clone(), step, register)),
        _ => None,
    })
}

/// Oracles used when a full enumeration is not needed: all zeros, all ones, and a
/// few pseudo-random ones.
pub fn sample_oracles(program: &Program, seed: u64, count: usize) -> Vec<Oracle> {
    let widths = site_widths(program);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![
        Oracle::new(vec![0; widths.len()]),
        Oracle::new(widths.iter().map(|w| crate::ir::word_mask(*w)).collect()),
    ];
    while out.len() < count {
        out.push(Oracle::new(widths.iter().map(|w| rng.gen::<u64>() & crate::ir::word_mask(*w)).collect()));
    }
    out
}

/// Generates a program and regenerates (with a derived seed) while M0 reports
/// undefined behavior on any sampled oracle.
pub fn gen_checked(config: &GenConfig) -> Program {
    let mut cfg = config.clone();
    for attempt in 0u64.. {
        let p = gen_program(&cfg);
        let ub = sample_oracles(&p, cfg.seed, 8).into_iter().any(|o| {
            !matches!(m0::run(&p, o, RunConfig::default()).map(|r| r.verdict()), Ok(v) if !matches!(v, Verdict::Ub(_)))
        });
        if !ub && validate(&p).is_ok() {
            return p;
        }
        cfg.seed = config.seed ^ (attempt + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    }
    unreachable!("unbounded loop")
}

/// Statement-level delta debugging: repeatedly drops statements (borrow pairs
/// together), phis and branches while the program still validates and `fails` holds.
pub fn shrink(program: &Program, fails: impl Fn(&Program) -> bool) -> Program {
    let mut best = program.clone();
    loop {
        let mut improved = false;
        for cand in candidates(&best) {
            if validate(&cand).is_ok() && fails(&cand) {
                best = cand;
                improved = true;
                break;
            }
        }
        if !improved {
            return best;
        }
    }
}

fn candidates(p: &Program) -> Vec<Program> {
    let mut out = Vec::new();
    // straighten branches first: they shed the most
    for (bi, b) in p.blocks.iter().enumerate() {
        if let crate::ir::Terminator::CondBr { then_label, else_label, .. } = &b.terminator {
            for target in [then_label, else_label] {
                let mut c = p.clone();
                c.blocks[bi].terminator = crate::ir::Terminator::Br(target.clone());
                out.push(drop_unreachable(c));
            }
        }
    }
    for (bi, b) in p.blocks.iter().enumerate().rev() {
        for i in (0..b.body.len()).rev() {
            let mut c = p.clone();
            let body = &mut c.blocks[bi].body;
            match &body[i].instr {
                Instr::MkSuc { .. } => continue,
                Instr::MkBor { .. } => {
                    body.drain(i..(i + 2).min(body.len()));
                }
                _ => {
                    body.remove(i);
                }
            }
            out.push(c);
        }
        for i in (0..b.phis.len()).rev() {
            let mut c = p.clone();
            c.blocks[bi].phis.remove(i);
            out.push(c);
        }
    }
    out
}

fn drop_unreachable(mut p: Program) -> Program {
    let mut reach = vec![false; p.blocks.len()];
    let mut work = vec![0];
    while let Some(b) = work.pop() {
        if std::mem::replace(&mut reach[b], true) {
            continue;
        }
        for s in p.blocks[b].terminator.successors() {
            if let Some(j) = p.block_index(s) {
                work.push(j);
            }
        }
    }
    let kept: Vec<_> = p.blocks.iter().enumerate().filter(|(i, _)| reach[*i]).map(|(_, b)| b.label.clone()).collect();
    p.blocks.retain(|b| kept.contains(&b.label));
    for b in &mut p.blocks {
        for phi in &mut b.phis {
            phi.incoming.retain(|(_, l)| kept.contains(l));
        }
    }
    // single-predecessor phis become copies
    let preds = p.predecessors();
    for (bi, b) in p.blocks.iter_mut().enumerate() {
        if preds[bi].len() == 1 {
            let phis = std::mem::take(&mut b.phis);
            let copies = phis.into_iter().filter_map(|phi| {
                let (v, _) = phi.incoming.into_iter().next()?;
                Some(crate::ir::Stmt::new(Instr::Copy { dst: phi.dst, src: v }))
            });
            let rest = std::mem::take(&mut b.body);
            b.body = copies.chain(rest).collect();
        }
    }
    p
}

/// Location of a statement, rendered for reports.
pub fn describe(program: &Program, loc: Loc) -> String {
    loc.display(program).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse;

    #[test]
    fn enumeration_order_and_limit() {
        let p = parse("fun f() width(4) { B: r0 = nd_bool() r1 = nd_char() halt }").unwrap();
        let o = enumerate_oracles(&p).unwrap();
        assert_eq!(o.len(), 2 * 16);
        assert_eq!(o[1].values, vec![0, 1]);
        assert_eq!(o[16].values, vec![1, 0]);
        let big = parse("fun f() width(8) { B: r0 = nd_char() r1 = nd_char() r2 = nd_char() halt }").unwrap();
        assert!(matches!(enumerate_oracles(&big), Err(CheckError::EnumerationTooLarge(24))));
    }

    #[test]
    fn falsifiable_assert_is_found() {
        let p = parse("fun f() width(4) { B: r0 = nd_char() r1 = r0 == 0 assert r1 halt }").unwrap();
        assert_eq!(exhaustive_verdict(&p).unwrap(), Concrete::Invalid(Oracle::new(vec![1])));
    }

    #[test]
    fn shrinking_keeps_the_failure() {
        let p = parse(
            "fun f() width(4) { B: r0 = nd_char() r1 = r0 + 1 r2 = r1 * 2 r3 = r0 == 3 assert r3 halt }",
        )
        .unwrap();
        let small = shrink(&p, |c| {
            c.blocks.iter().flat_map(|b| &b.body).any(|s| matches!(s.instr, Instr::Assert { .. }))
                && matches!(exhaustive_verdict(c), Ok(Concrete::Invalid(_)))
        });
        assert!(small.instr_count() < p.instr_count());
        assert!(matches!(exhaustive_verdict(&small), Ok(Concrete::Invalid(_))));
    }
}
