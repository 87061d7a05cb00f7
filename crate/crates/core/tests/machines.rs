use ownir::ir::{validate, Program, Reg};
use ownir::machine::lockstep::lockstep_diff;
use ownir::machine::m1::{self, CacheCheck, Fault, M1Config};
use ownir::machine::{m0, CacheVal, MemCell, Oracle, RunConfig, Status, Value, Verdict};
use ownir::text::parse;

const WALKTHROUGH: &str = include_str!("../../../programs/borrow_walkthrough.oseair");
const TYPESTATE: &str = include_str!("../../../programs/typestate.oseair");
const TYPESTATE_WEAK: &str = include_str!("../../../programs/typestate_weak.oseair");
const UB: &str = include_str!("../../../programs/ub.oseair");

fn program(src: &str) -> Program {
    let p = parse(src).unwrap();
    let report = validate(&p);
    assert!(report.is_ok(), "{}", report.render(&p));
    p
}

fn single(body: &str) -> Program {
    program(&format!("fun main() {{\nBB0:\n  m00 = mem.init()\n{body}\n  halt\n}}"))
}

fn level(lvl: &str, body: &str) -> Program {
    program(&format!("fun main() level({lvl}) {{\nBB0:\n  m00 = mem.init()\n{body}\n  halt\n}}"))
}

fn traced() -> RunConfig {
    RunConfig { record_trace: true, ..RunConfig::default() }
}

fn verdict0(p: &Program) -> Verdict {
    m0::run(p, Oracle::default(), RunConfig::default()).unwrap().verdict()
}

#[test]
fn borrow_walkthrough_states() {
    let p = program(WALKTHROUGH);
    let out = m0::run(&p, Oracle::default(), traced()).unwrap();
    assert_eq!(out.status, Status::Halted);
    assert_eq!(out.register("r"), Some(Value::Word(43)));
    let lines: Vec<String> = out.trace.iter().map(|t| t.to_string()).collect();
    let find = |needle: &str| lines.iter().find(|l| l.contains(needle)).cloned().unwrap_or_default();
    let mk = find("mk_own");
    assert!(mk.contains("R[p0] = (0x4,1)"), "{mk}");
    assert!(mk.contains("M[0x4] = 42"), "{mk}");
    assert!(mk.contains("SB[0x4] = 1 :: []"), "{mk}");
    let pair = find("mut_mkbor");
    assert!(pair.contains("R[p1] = (0x4,2)") && pair.contains("R[q0] = (0x4,3)"), "{pair}");
    assert!(pair.contains("SB[0x4] = 3 :: 2 :: []"), "{pair}");
    assert!(find("die q0").contains("SB[0x4] = 2 :: []"));
    assert!(find("store").contains("M[0x4] = 43"));
}

#[test]
fn cached_machine_serves_both_loads_from_cache() {
    let p = program(WALKTHROUGH);
    let plain = m0::run(&p, Oracle::default(), RunConfig::default()).unwrap();
    let cached = m1::run(&p, Oracle::default(), M1Config::default(), RunConfig::default()).unwrap();
    assert_eq!(cached.register("r"), Some(Value::Word(43)));
    assert_eq!(plain.stats.mem_reads, 2);
    assert_eq!(cached.stats.mem_reads, 0);
    assert_eq!(cached.stats.cache_hits, 2);
    // the dying borrow handed its cache to the successor
    match cached.register("p1") {
        Some(Value::Ptr(ptr)) => assert_eq!(ptr.cache, Some(CacheVal::Word(43))),
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalidated_borrow_is_undefined() {
    let p = program(UB);
    let out = m0::run(&p, Oracle::default(), RunConfig::default()).unwrap();
    assert_eq!(out.verdict(), Verdict::Ub("tag-not-in-stack"));
}

#[test]
fn vacuous_path_stops_at_assume() {
    let p = single("  assume 0\n  assert 0");
    let out = m0::run(&p, Oracle::default(), RunConfig::default()).unwrap();
    assert!(matches!(out.status, Status::AssumeInfeasible(_)));
}

#[test]
fn mutable_pair_rows() {
    // from a read-only borrow
    let p = single(
        "  p0, m0 = mk_own 1, m00\n  p1 = ro_mkbor p0\n  p2 = ro_mksuc p0\n  p3 = mut_mkbor p1\n  p4 = mut_mksuc p1",
    );
    assert_eq!(verdict0(&p), Verdict::Ub("mut-borrow-from-shared"));
    // from a copy
    let p = single(
        "  p0, m0 = mk_own 1, m00\n  p1 = cpy_mkcpy1 p0\n  p2 = cpy_mkcpy2 p0\n  p3 = mut_mkbor p1\n  p4 = mut_mksuc p1",
    );
    assert_eq!(verdict0(&p), Verdict::Ub("mut-borrow-from-shared"));
    // reborrow of a borrow is fine
    let p = single(
        "  p0, m0 = mk_own 1, m00\n  p1 = mut_mkbor p0\n  p2 = mut_mksuc p0\n  p3 = mut_mkbor p1\n  p4 = mut_mksuc p1\n  die p3\n  die p4",
    );
    assert_eq!(verdict0(&p), Verdict::Pass);
}

#[test]
fn copy_pair_rows() {
    let p = single(
        "  p0, m0 = mk_own 7, m00\n  p1 = cpy_mkcpy1 p0\n  p2 = cpy_mkcpy2 p0\n  r1 = load p1, m0\n  r2 = load p2, m0\n  m1 = store 3, p1, m0\n  r3 = load p1, m1\n  assert r1 == 7\n  assert r3 == 3",
    );
    assert_eq!(verdict0(&p), Verdict::Pass);
    // a copy made after a later borrow pair discards the earlier copies
    let p = single(
        "  p0, m0 = mk_own 7, m00\n  p1 = cpy_mkcpy1 p0\n  p2 = cpy_mkcpy2 p0\n  p3 = cpy_mkcpy1 p2\n  p4 = cpy_mkcpy2 p2\n  r1 = load p1, m0",
    );
    assert_eq!(verdict0(&p), Verdict::Ub("tag-not-in-stack"));
}

#[test]
fn die_rows() {
    let p = single(
        "  p0, m0 = mk_own 1, m00\n  p1 = mut_mkbor p0\n  p2 = mut_mksuc p0\n  p3 = mut_mkbor p1\n  p4 = mut_mksuc p1\n  die p4",
    );
    assert_eq!(verdict0(&p), Verdict::Ub("die-not-top"));
    let p = single("  p0, m0 = mk_own 1, m00\n  p1 = cpy_mkcpy1 p0\n  p2 = cpy_mkcpy2 p0\n  die p1");
    assert_eq!(verdict0(&p), Verdict::Ub("die-on-copied"));
    let p = single("  p0, m0 = mk_own 1, m00\n  die p0");
    assert_eq!(verdict0(&p), Verdict::Ub("die-on-owned"));
}

#[test]
fn store_and_load_rows() {
    let p = single("  p0, m0 = mk_own 1, m00\n  p1 = ro_mkbor p0\n  p2 = ro_mksuc p0\n  m1 = store 2, p1, m0");
    assert_eq!(verdict0(&p), Verdict::Ub("write-through-ro"));
    // loads through a popped borrow
    let p = single(
        "  p0, m0 = mk_own 1, m00\n  p1 = mut_mkbor p0\n  p2 = mut_mksuc p0\n  r1 = load p2, m0\n  r2 = load p1, m0",
    );
    assert_eq!(verdict0(&p), Verdict::Ub("tag-not-in-stack"));
    // stale memory versions are rejected
    let p = single("  p0, m0 = mk_own 1, m00\n  m1 = store 2, p0, m0\n  r1 = load p0, m0");
    assert_eq!(verdict0(&p), Verdict::Ub("stale-memory"));
}

#[test]
fn read_only_borrow_shares_and_dies_without_transfer() {
    let p = single(
        "  p0, m0 = mk_own 5, m00\n  p1 = ro_mkbor p0\n  p2 = ro_mksuc p0\n  r1 = load p1, m0\n  die p1\n  r2 = load p2, m0\n  r3 = r1 + r2\n  assert r3 == 10",
    );
    assert_eq!(verdict0(&p), Verdict::Pass);
    let l = lockstep_diff(&p, &Oracle::default(), M1Config::default(), RunConfig::default());
    assert!(l.equivalent(), "{l:?}");
    // a load through the lender retires the read-only borrow
    let p = single(
        "  p0, m0 = mk_own 5, m00\n  p1 = ro_mkbor p0\n  p2 = ro_mksuc p0\n  r1 = load p1, m0\n  r2 = load p2, m0\n  die p1",
    );
    assert_eq!(verdict0(&p), Verdict::Ub("tag-not-in-stack"));
}

#[test]
fn typestate_listing_under_both_branches() {
    let p = program(TYPESTATE);
    let direct = m0::run(&p, Oracle::new(vec![42, 0]), RunConfig::default()).unwrap();
    assert_eq!(direct.status, Status::Halted);
    assert_eq!(direct.register("r29"), Some(Value::Word(42)));
    let via_bb1 = m0::run(&p, Oracle::new(vec![42, 1, 50]), RunConfig::default()).unwrap();
    assert_eq!(via_bb1.status, Status::Halted);
    assert_eq!(via_bb1.register("r29"), Some(Value::Word(50)));
    for oracle in [vec![42, 0], vec![42, 1, 50]] {
        let l = lockstep_diff(&p, &Oracle::new(oracle), M1Config::default(), RunConfig::default());
        assert!(l.equivalent(), "{l:?}");
    }
    let weak = program(TYPESTATE_WEAK);
    let out = m0::run(&weak, Oracle::new(vec![42, 1, 50]), RunConfig::default()).unwrap();
    assert_eq!(out.verdict(), Verdict::AssertFail);
}

#[test]
fn borrow_below_top_reads_memory_not_lender_cache() {
    let p = single(
        "  p0, m0 = mk_own 5, m00\n  p1 = cpy_mkcpy1 p0\n  p2 = cpy_mkcpy2 p0\n  m1 = store 9, p1, m0\n  q0 = mut_mkbor p2\n  q1 = mut_mksuc p2\n  r1 = load q0, m1",
    );
    let plain = m0::run(&p, Oracle::default(), RunConfig::default()).unwrap();
    let expected = plain.register("r1").unwrap();
    assert_eq!(expected, Value::Word(9));
    let cached = m1::run(&p, Oracle::default(), M1Config::default(), RunConfig::default()).unwrap();
    match cached.register("q0") {
        Some(Value::Ptr(q)) => assert_eq!(q.cache, Some(CacheVal::Word(9))),
        other => panic!("{other:?}"),
    }
    assert_eq!(cached.register("r1"), Some(expected));
    assert_eq!(cached.stats.cache_hits, 1);
}

#[test]
fn cache_invariant_holds_along_walkthrough_and_catches_corruption() {
    let p = program(WALKTHROUGH);
    let (out, violation) = m1::run_checked(&p, Oracle::default(), M1Config::default(), RunConfig::default()).unwrap();
    assert_eq!(out.status, Status::Halted);
    assert_eq!(violation, None);

    let mut m = m1::machine(&p, Oracle::default(), M1Config::default(), RunConfig::default());
    m.step();
    m.step();
    assert_eq!(m1::check_cache_equivalence(&m), CacheCheck::Holds);
    m.corrupt_cache(&Reg::named("p0"), Some(CacheVal::Word(0)));
    match m1::check_cache_equivalence(&m) {
        CacheCheck::Violation { register, .. } => assert_eq!(register, "p0"),
        CacheCheck::Holds => panic!("corruption not detected"),
    }
}

#[test]
fn lockstep_detects_unsynchronized_store() {
    let p = program(WALKTHROUGH);
    let ok = lockstep_diff(&p, &Oracle::default(), M1Config::default(), RunConfig::default());
    assert!(ok.equivalent());
    assert_eq!(ok.steps, 9);
    let faulty = M1Config { fault: Some(Fault::SkipStoreCacheSync), ..M1Config::default() };
    let bad = lockstep_diff(&p, &Oracle::default(), faulty, RunConfig::default());
    let d = bad.divergence.expect("fault must be visible");
    assert_eq!(d.component, "regs");
    assert!(d.detail.starts_with("r:"), "{d:?}");
}

#[test]
fn summary_cache_operations() {
    let p = level("m2", "  p0, m0 = mk_own 4, m00\n  p1 = set_cache p0, 17\n  r1 = get_cache p1\n  assert r1 == 17");
    assert_eq!(verdict0(&p), Verdict::Pass);
    let p = level("m2", "  p0, m0 = mk_own 4, m00\n  r1 = get_cache p0");
    assert_eq!(verdict0(&p), Verdict::Ub("cache-uninit"));
    let p = level(
        "m2",
        "  p0, m0 = malloc 4, m00\n  p1 = set_cache p0, 3\n  p2 = begin_unique p1\n  p3 = end_unique p2\n  r1 = get_cache p3\n  assert r1 == 3",
    );
    let out = m0::run(&p, Oracle::default(), RunConfig::default()).unwrap();
    assert_eq!(out.verdict(), Verdict::Pass);
    let (Some(Value::Ptr(a)), Some(Value::Ptr(b))) = (out.register("p1"), out.register("p3")) else { panic!() };
    assert_eq!((a.addr, a.cache), (b.addr, b.cache));
    let p = level("m2", "  p0, m0 = mk_own 4, m00\n  p1 = begin_unique p0");
    assert_eq!(verdict0(&p), Verdict::Ub("unique-from-non-copied"));
}

#[test]
fn sized_allocation_does_not_write() {
    let p = level("m2", "  p0, m0 = mk_own 8, m00\n  r1 = load p0, m0");
    assert_eq!(verdict0(&p), Verdict::Ub("read-uninit"));
    let p = level("m2", "  p0, m0 = mk_own 8, m00\n  p1 = mut_mkbor_off p0, 8\n  p2 = mut_mksuc p0");
    assert_eq!(verdict0(&p), Verdict::Ub("out-of-bounds"));
}

#[test]
fn pointer_round_trip_through_owned_container() {
    let p = level(
        "m3",
        "  p0, m0 = mk_own 7, m00\n  pp, m1 = mk_own 0, m0\n  m2 = store p0, pp, m1\n  q = load pp, m2\n  r = load q, m2\n  assert r == 7\n  r2 = load pp, m2",
    );
    let plain = m0::run(&p, Oracle::default(), RunConfig::default()).unwrap();
    assert_eq!(plain.verdict(), Verdict::Ub("mixed-cell-kind"));
    let p = level(
        "m3",
        "  p0, m0 = mk_own 7, m00\n  pp, m1 = mk_own 0, m0\n  m2 = store p0, pp, m1\n  q = load pp, m2\n  r = load q, m2\n  assert r == 7",
    );
    let cached = m1::run(&p, Oracle::default(), M1Config::default(), RunConfig::default()).unwrap();
    assert_eq!(cached.verdict(), Verdict::Pass);
    let (Some(Value::Ptr(orig)), Some(Value::Ptr(back))) = (cached.register("p0"), cached.register("q")) else {
        panic!()
    };
    assert_eq!((orig.addr, orig.tag, orig.cache), (back.addr, back.tag, back.cache));
    assert!(lockstep_diff(&p, &Oracle::default(), M1Config::default(), RunConfig::default()).equivalent());
}

#[test]
fn scalar_and_pointer_cells_keep_their_kinds() {
    let p = level(
        "m3",
        "  p0, m0 = mk_own 7, m00\n  pa, m1 = mk_own 0, m0\n  pb, m2 = mk_own 0, m1\n  m3 = store 11, pa, m2\n  m4 = store p0, pb, m3\n  r1 = load pa, m4\n  q = load pb, m4\n  r2 = load q, m4\n  assert r1 == 11\n  assert r2 == 7",
    );
    assert_eq!(verdict0(&p), Verdict::Pass);
}

#[test]
fn die_updates_successor_moved_to_memory() {
    let p = level(
        "m3",
        "  p0, m0 = mk_own 7, m00\n  pp, m1 = mk_own 0, m0\n  q0 = mut_mkbor p0\n  p1 = mut_mksuc p0\n  m2 = mov_reg2mem p1, pp, m1\n  m3 = store 9, q0, m2\n  die q0\n  q2, m4 = mut_mkbor_mem2reg pp, m3\n  r = load q2, m4\n  assert r == 9",
    );
    let plain = m0::run(&p, Oracle::default(), RunConfig::default()).unwrap();
    assert_eq!(plain.verdict(), Verdict::Pass);
    // stop the cached machine right after the die and inspect the stored successor
    let mut m = m1::machine(&p, Oracle::default(), M1Config::default(), RunConfig::default());
    for _ in 0..7 {
        m.step();
    }
    let cell = m.memory().values().find_map(|c| match c {
        MemCell::Ptr { cache, .. } => Some(*cache),
        _ => None,
    });
    let pointee = match plain.register("q2") {
        Some(Value::Ptr(q)) => q.addr,
        other => panic!("{other:?}"),
    };
    assert_eq!(pointee, 0x4);
    assert_eq!(cell, Some(Some(9)));
    assert!(lockstep_diff(&p, &Oracle::default(), M1Config::default(), RunConfig::default()).equivalent());
}

#[test]
fn loops_run_under_step_limit() {
    let p = program(include_str!("../../../programs/looped.oseair"));
    for start in 0..4 {
        let out = m0::run(&p, Oracle::new(vec![start]), RunConfig::default()).unwrap();
        assert_eq!(out.verdict(), Verdict::Pass);
    }
    let tight = RunConfig { step_limit: 5, ..RunConfig::default() };
    assert!(m0::run(&p, Oracle::new(vec![3]), tight).is_err());
}
