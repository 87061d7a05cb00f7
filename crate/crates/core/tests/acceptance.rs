//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails. Time limits are part of each criterion.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use ownir::harness::bench::{run_bench, BenchReport, BenchSpec, Family, Mode};
use ownir::harness::check::{enumerate_oracles, three_way_check, CheckConfig, Concrete, ThreeWay};
use ownir::harness::corpus::{corpus_program, reproducer, Failure};
use ownir::harness::m3::{check_m3, gen_m3};
use ownir::harness::cache_violation;
use ownir::ir::{flatten, Level, Program};
use ownir::machine::lockstep::lockstep_diff;
use ownir::machine::m1::{self, Fault, M1Config};
use ownir::machine::{m0, Machine, MemCell, Oracle, RunConfig, Value};
use ownir::smt::{solve, to_smtlib, SatResult, SolverConfig};
use ownir::text::parse;
use ownir::vcgen::{encode, Encoding};

const WALKTHROUGH: &str = include_str!("../../../programs/borrow_walkthrough.oseair");
const TYPESTATE: &str = include_str!("../../../programs/typestate.oseair");

const CORPUS_M1: u64 = 1000;
const CORPUS_THREE_WAY: u64 = 500;
const M3_CASES: u64 = 100;
const BENCH_SIZES: [usize; 3] = [2, 4, 8];
const MAX_REPRODUCER: usize = 15;
const MAX_WIDTH: u32 = 8;
const MAX_NONDET: usize = 3;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    check: fn() -> Outcome,
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn solver() -> SolverConfig {
    SolverConfig::from_env()
}

fn m1_corpus() -> Vec<Program> {
    (0..CORPUS_M1).into_par_iter().map(|s| corpus_program(s, Some(Level::M1), 4)).collect()
}

/// Step-by-step snapshots of the walkthrough program on one machine.
fn golden_on(machine: &str) -> Result<(), String> {
    let p = parse(WALKTHROUGH).map_err(|e| e.to_string())?;
    let mut m = match machine {
        "m0" => m0::machine(&p, Oracle::default(), RunConfig::default()),
        _ => m1::machine(&p, Oracle::default(), M1Config::default(), RunConfig::default()),
    };
    let stack = |m: &Machine<'_>| -> Vec<u64> {
        m.borrows().stack_at(0x4).map(|s| s.entries().iter().rev().map(|e| e.0).collect()).unwrap_or_default()
    };
    let reg = |m: &Machine<'_>, name: &str| m.registers().find(|(r, _)| r.name() == name).map(|(_, v)| *v);
    let mut seen = Vec::new();
    while m.is_running() {
        m.step();
        seen.push(stack(&m));
        if seen.len() == 2 {
            match reg(&m, "p0") {
                Some(Value::Ptr(ptr)) if ptr.addr == 0x4 && ptr.tag == 1 => {}
                other => return Err(format!("{machine}: p0 = {other:?} after mk_own")),
            }
            if m.memory().get(&0x4) != Some(&MemCell::Word(42)) {
                return Err(format!("{machine}: mem[0x4] = {:?} after mk_own", m.memory().get(&0x4)));
            }
            if seen[1] != [1] {
                return Err(format!("{machine}: stack {:?} after mk_own", seen[1]));
            }
        }
    }
    let want: [&[u64]; 3] = [&[1], &[3, 2], &[2]];
    let mut phases: Vec<&Vec<u64>> = Vec::new();
    for s in seen.iter().filter(|s| !s.is_empty()) {
        if phases.last() != Some(&s) {
            phases.push(s);
        }
    }
    if phases.len() != 3 || phases.iter().zip(want).any(|(a, b)| a.as_slice() != b) {
        return Err(format!("{machine}: stack sequence {phases:?}"));
    }
    match reg(&m, "r") {
        Some(Value::Word(43)) => Ok(()),
        other => Err(format!("{machine}: final r = {other:?}")),
    }
}

fn golden_trace() -> Outcome {
    golden_on("m0")?;
    golden_on("m1")?;
    Ok("p0=(0x4,1) mem[0x4]=42 SB [1] -> [3,2] -> [2], r=43 on M0 and M1".into())
}

fn running_example() -> Outcome {
    let p = parse(TYPESTATE).map_err(|e| e.to_string())?;
    let flat = flatten(&p).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for enc in [Encoding::Ownsem, Encoding::Baseline] {
        let script = encode(&flat, enc).map_err(|e| e.to_string())?;
        let (reads, writes) = script.count_array_ops();
        if enc == Encoding::Ownsem && (reads, writes) != (0, 0) {
            return Err(format!("ownsem script has {reads} array reads and {writes} array writes"));
        }
        let reply = solve(&to_smtlib(&script).map_err(|e| e.to_string())?, &solver()).map_err(|e| e.to_string())?;
        if reply.result != SatResult::Unsat {
            return Err(format!("{} VC is {}", enc.name(), reply.result.name()));
        }
        notes.push(format!("{} unsat ({reads} reads, {writes} writes)", enc.name()));
    }
    Ok(notes.join(", "))
}

fn cache_equivalence_with(m1: M1Config) -> Result<usize, (Program, Failure)> {
    let corpus = m1_corpus();
    let mut bad: Vec<(u64, Program, Failure)> = corpus
        .into_par_iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let oracles = enumerate_oracles(&p).ok()?;
            cache_violation(&p, &oracles, m1)
                .map(|(oracle, step, register)| (i as u64, p, Failure::CacheViolation { oracle, step, register }))
        })
        .collect();
    bad.sort_by_key(|b| b.0);
    match bad.into_iter().next() {
        None => Ok(0),
        Some((_, p, f)) => Err((p, f)),
    }
}

fn cache_equivalence() -> Outcome {
    let corpus = m1_corpus();
    let steps: usize = corpus
        .par_iter()
        .map(|p| enumerate_oracles(p).map(|o| o.len()).unwrap_or(0))
        .sum();
    match cache_equivalence_with(M1Config::default()) {
        Ok(_) => Ok(format!("{CORPUS_M1} programs, {steps} runs, 0 violations")),
        Err((_, f)) => Err(f.summary()),
    }
}

fn lockstep() -> Outcome {
    let corpus = m1_corpus();
    let checked: Vec<Result<usize, String>> = corpus
        .par_iter()
        .map(|p| {
            let oracles = enumerate_oracles(p).map_err(|e| e.to_string())?;
            for o in &oracles {
                let r = lockstep_diff(p, o, M1Config::default(), RunConfig::default());
                if let Some(d) = r.divergence {
                    return Err(format!("step {} {}: {} (oracle {:?})", d.step, d.component, d.detail, o.values));
                }
            }
            Ok(oracles.len())
        })
        .collect();
    let mut runs = 0;
    for c in checked {
        runs += c?;
    }
    Ok(format!("{CORPUS_M1} programs, {runs} lockstep runs, 0 divergences"))
}

fn three_way_corpus(m1: M1Config) -> Vec<(Program, Result<ThreeWay, String>)> {
    let cfg = CheckConfig { solver: solver(), m1, ..CheckConfig::default() };
    (0..CORPUS_THREE_WAY)
        .into_par_iter()
        .map(|s| {
            let p = corpus_program(s, None, 4);
            let r = three_way_check(&p, &cfg).map_err(|e| e.to_string());
            (p, r)
        })
        .collect()
}

fn three_way() -> Outcome {
    let results = three_way_corpus(M1Config::default());
    let (mut valid, mut replayed) = (0, 0);
    for (i, (p, r)) in results.iter().enumerate() {
        if p.width > MAX_WIDTH || ownir::ir::nondet_sites(p).len() > MAX_NONDET {
            return Err(format!("program {i} exceeds the size bounds"));
        }
        let t = r.as_ref().map_err(|e| format!("program {i}: {e}"))?;
        if !t.agree() {
            return Err(format!("program {i}: {t:?}"));
        }
        match t.concrete {
            Concrete::Valid => valid += 1,
            Concrete::Invalid(_) => replayed += 2,
        }
    }
    Ok(format!(
        "{CORPUS_THREE_WAY} programs agree ({valid} valid, {} invalid), {replayed} sat models replayed",
        CORPUS_THREE_WAY as usize - valid
    ))
}

fn reads_of(report: &BenchReport, family: Family, mode: Mode) -> Vec<usize> {
    BENCH_SIZES
        .iter()
        .map(|&n| {
            report
                .records
                .iter()
                .find(|r| r.spec == family.name() && r.n == n && r.mode == mode.name())
                .map_or(usize::MAX, |r| r.reads)
        })
        .collect()
}

fn bench_structure() -> Outcome {
    let families = [Family::ManyBuffers, Family::FileTypestate];
    let specs: Vec<BenchSpec> = families
        .iter()
        .flat_map(|&family| {
            BENCH_SIZES.iter().flat_map(move |&n| Mode::ALL.into_iter().map(move |mode| BenchSpec { family, n, mode }))
        })
        .collect();
    let report = run_bench(&specs, 1, &solver());
    if !report.agree() {
        return Err("verdicts differ across modes or a cell failed".into());
    }
    for family in families {
        let own = reads_of(&report, family, Mode::Ownsem);
        if own.windows(2).any(|w| w[0] != w[1]) {
            return Err(format!("{}: ownsem reads {own:?} vary with n", family.name()));
        }
        for mode in [Mode::BaselineShadow, Mode::BaselineMain] {
            let base = reads_of(&report, family, mode);
            let linear = base[0] > 0
                && BENCH_SIZES.iter().zip(&base).all(|(&n, &r)| r * BENCH_SIZES[0] >= base[0] * n);
            if !linear {
                return Err(format!("{} {}: reads {base:?} not linear in n", family.name(), mode.name()));
            }
        }
    }
    let speedups: Vec<String> = report
        .speedups
        .iter()
        .filter(|s| s.n == 8)
        .map(|s| format!("{}/{} {:.2}x", s.spec, s.baseline, s.speedup))
        .collect();
    let mut msg = format!("array reads linear for baselines, constant for ownsem; n=8 speedups: {}", speedups.join(", "));
    for note in &report.notes {
        msg.push_str(&format!("; flagged: {note}"));
    }
    Ok(msg)
}

fn m3_round_trip() -> Outcome {
    let failures: Vec<String> = (0..M3_CASES)
        .into_par_iter()
        .filter_map(|s| check_m3(&gen_m3(s)).err().map(|e| format!("seed {s}: {e}")))
        .collect();
    match failures.first() {
        None => Ok(format!("{M3_CASES} programs: pointers reconstructed, stored caches updated, M0 and M1 agree")),
        Some(e) => Err(e.clone()),
    }
}

fn negative_control() -> Outcome {
    let faulty = M1Config { fault: Some(Fault::SkipStoreCacheSync), ..M1Config::default() };
    let check = CheckConfig { solver: solver(), m1: faulty, ..CheckConfig::default() };
    let (p3, f3) = match cache_equivalence_with(faulty) {
        Ok(_) => return Err("cache-equivalence suite passes with the fault injected".into()),
        Err(x) => x,
    };
    let small3 = reproducer(&p3, &f3, &check);
    let results = three_way_corpus(faulty);
    let Some((p5, t5)) = results.into_iter().find_map(|(p, r)| r.ok().filter(|t| !t.agree()).map(|t| (p, t))) else {
        return Err("three-way suite passes with the fault injected".into());
    };
    let small5 = reproducer(&p5, &Failure::Disagreement(t5), &check);
    let (n3, n5) = (small3.instr_count(), small5.instr_count());
    if n3 > MAX_REPRODUCER || n5 > MAX_REPRODUCER {
        return Err(format!("reproducers have {n3} and {n5} instructions"));
    }
    Ok(format!("fault caught by cache-equivalence and three-way suites; reproducers of {n3} and {n5} instructions"))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "golden trace of the borrow walkthrough", limit: secs(1), check: golden_trace },
        Criterion { id: 2, name: "running example VCs", limit: secs(5), check: running_example },
        Criterion { id: 3, name: "cache equivalence on generated M1 programs", limit: secs(120), check: cache_equivalence },
        Criterion { id: 4, name: "M0/M1 lockstep on the same corpus", limit: secs(120), check: lockstep },
        Criterion { id: 5, name: "three-way verdict agreement", limit: secs(600), check: three_way },
        Criterion { id: 6, name: "benchmark structure", limit: secs(300), check: bench_structure },
        Criterion { id: 7, name: "pointers through owned containers", limit: secs(60), check: m3_round_trip },
        Criterion { id: 8, name: "negative control: skipped cache sync", limit: secs(900), check: negative_control },
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let result = (c.check)();
        let took = start.elapsed();
        let result = match result {
            Ok(msg) if took > c.limit => Err(format!("{msg}; took longer than {:?}", c.limit)),
            r => r,
        };
        let (tag, msg) = match &result {
            Ok(m) => ("PASS", m),
            Err(m) => ("FAIL", m),
        };
        println!("{tag} [{}] {} ({:.2}s of {}s): {msg}", c.id, c.name, took.as_secs_f64(), c.limit.as_secs());
        failed += usize::from(result.is_err());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
