//! Programs that move pointers through owned containers (level M3) and the checks
//! that they come back intact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ir::Program;
use crate::machine::lockstep::lockstep_diff;
use crate::machine::m1::{self, M1Config};
use crate::machine::{m0, MemCell, Oracle, RunConfig, Value, Verdict};
use crate::text::parse;

/// A generated program plus what its run must show.
#[derive(Debug, Clone)]
pub struct M3Case {
    pub program: Program,
    /// `(original, reloaded)` register pairs that must hold the same address and tag.
    pub same_pointer: Vec<(String, String)>,
    /// `(container, value)`: after the run the cell at the container's address holds
    /// a pointer whose cache is `value` (written when a borrow of it died).
    pub cell_cache: Vec<(String, u64)>,
}

/// One to three objects, each taken through one of three container scenarios:
/// copy a pointer into memory and load it back; move it in and borrow it out of the
/// container; or move a successor in while its borrow is still live.
pub fn gen_m3(seed: u64) -> M3Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = vec!["m0 = mem.init()".to_string()];
    let mut m = 0;
    fn next_mem(lines: &mut Vec<String>, m: &mut usize, text: String) {
        *m += 1;
        lines.push(text.replace("MOUT", &format!("m{m}")).replace("MIN", &format!("m{}", *m - 1)));
    }
    let mut same_pointer = Vec::new();
    let mut cell_cache = Vec::new();
    for i in 0..rng.gen_range(1..=3) {
        let n: u64 = rng.gen_range(0..256);
        let k: u64 = rng.gen_range(0..256);
        next_mem(&mut lines, &mut m, format!("pv{i}, MOUT = mk_own {n}, MIN"));
        next_mem(&mut lines, &mut m, format!("pc{i}, MOUT = mk_own 0, MIN"));
        match rng.gen_range(0..3) {
            0 => {
                next_mem(&mut lines, &mut m, format!("MOUT = store pv{i}, pc{i}, MIN"));
                lines.push(format!("pl{i} = load pc{i}, m{m}"));
                lines.push(format!("r{i} = load pl{i}, m{m}"));
                lines.push(format!("assert r{i} == {n}"));
                same_pointer.push((format!("pv{i}"), format!("pl{i}")));
            }
            1 => {
                next_mem(&mut lines, &mut m, format!("MOUT = mov_reg2mem pv{i}, pc{i}, MIN"));
                next_mem(&mut lines, &mut m, format!("qb{i}, MOUT = mut_mkbor_mem2reg pc{i}, MIN"));
                lines.push(format!("rb{i} = load qb{i}, m{m}"));
                lines.push(format!("assert rb{i} == {n}"));
                next_mem(&mut lines, &mut m, format!("MOUT = store {k}, qb{i}, MIN"));
                lines.push(format!("die qb{i}"));
                lines.push(format!("pl{i} = load pc{i}, m{m}"));
                lines.push(format!("r{i} = load pl{i}, m{m}"));
                lines.push(format!("assert r{i} == {k}"));
                cell_cache.push((format!("pc{i}"), k));
            }
            _ => {
                lines.push(format!("qb{i} = mut_mkbor pv{i}"));
                lines.push(format!("ps{i} = mut_mksuc pv{i}"));
                next_mem(&mut lines, &mut m, format!("MOUT = mov_reg2mem ps{i}, pc{i}, MIN"));
                next_mem(&mut lines, &mut m, format!("MOUT = store {k}, qb{i}, MIN"));
                lines.push(format!("die qb{i}"));
                lines.push(format!("pl{i} = load pc{i}, m{m}"));
                lines.push(format!("r{i} = load pl{i}, m{m}"));
                lines.push(format!("assert r{i} == {k}"));
                cell_cache.push((format!("pc{i}"), k));
            }
        }
    }
    let src = format!("fun m3_{seed}() width(8) level(m3) {{\nB0:\n  {}\n  halt\n}}\n", lines.join("\n  "));
    let program = parse(&src).expect("generated M3 program parses");
    M3Case { program, same_pointer, cell_cache }
}

fn ptr_of(regs: &[(String, Value)], name: &str) -> Option<(u64, u64)> {
    match regs.iter().find(|(n, _)| n == name)?.1 {
        Value::Ptr(p) => Some((p.addr, p.tag)),
        _ => None,
    }
}

/// Runs both machines and checks verdicts, lockstep equivalence, pointer identity
/// after reloading, and the caches written into stored successors.
pub fn check_m3(case: &M3Case) -> Result<(), String> {
    let cfg = RunConfig::default();
    let plain = m0::run(&case.program, Oracle::default(), cfg).map_err(|e| e.to_string())?;
    let cached = m1::run(&case.program, Oracle::default(), M1Config::default(), cfg).map_err(|e| e.to_string())?;
    for (name, out) in [("M0", &plain), ("M1", &cached)] {
        if out.verdict() != Verdict::Pass {
            return Err(format!("{name} ended with {}", out.verdict()));
        }
    }
    let diff = lockstep_diff(&case.program, &Oracle::default(), M1Config::default(), cfg);
    if let Some(d) = diff.divergence {
        return Err(format!("machines diverge at step {} in {}: {}", d.step, d.component, d.detail));
    }
    for out in [&plain, &cached] {
        for (a, b) in &case.same_pointer {
            let (pa, pb) = (ptr_of(&out.registers, a), ptr_of(&out.registers, b));
            if pa.is_none() || pa != pb {
                return Err(format!("{b} = {pb:?} does not reproduce {a} = {pa:?}"));
            }
        }
    }
    let mut machine = m1::machine(&case.program, Oracle::default(), M1Config::default(), cfg);
    while machine.is_running() {
        machine.step();
    }
    for (container, want) in &case.cell_cache {
        let addr = machine
            .registers()
            .find(|(r, _)| r.name() == container)
            .and_then(|(_, v)| match v {
                Value::Ptr(p) => Some(p.addr),
                _ => None,
            })
            .ok_or_else(|| format!("{container} is not bound"))?;
        match machine.memory().get(&addr) {
            Some(MemCell::Ptr { cache: Some(c), .. }) if c == want => {}
            other => return Err(format!("cell of {container} is {other:?}, expected cache {want}")),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_cases_hold() {
        for seed in 0..20 {
            let case = gen_m3(seed);
            check_m3(&case).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{}", crate::text::print(&case.program)));
        }
    }

    #[test]
    fn wrong_expectation_is_reported() {
        let mut case = gen_m3(3);
        case.cell_cache.push(("pc0".into(), 1000));
        assert!(check_m3(&case).is_err());
    }
}
