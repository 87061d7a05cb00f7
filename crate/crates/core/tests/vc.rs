use ownir::ir::flatten;
use ownir::machine::{m0, Oracle, RunConfig, Verdict};
use ownir::smt::{solve, to_smtlib, ModelValue, SatResult, SolverConfig};
use ownir::text::parse;
use ownir::vcgen::{encode_baseline, encode_ownsem, Encoding};

fn load(name: &str) -> ownir::ir::Program {
    let path = format!("{}/../../programs/{name}", env!("CARGO_MANIFEST_DIR"));
    parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn verdict(name: &str, enc: Encoding) -> SatResult {
    let p = flatten(&load(name)).unwrap();
    let s = ownir::vcgen::encode(&p, enc).unwrap();
    solve(&to_smtlib(&s).unwrap(), &SolverConfig::from_env()).unwrap().result
}

fn nondet_oracle(model: &std::collections::BTreeMap<String, ModelValue>, sites: usize) -> Oracle {
    Oracle::new(
        (0..sites)
            .map(|k| match model.get(&format!("nd_{k}")) {
                Some(ModelValue::Bv { value, .. }) => *value,
                _ => 0,
            })
            .collect(),
    )
}

#[test]
fn borrow_write_is_proved() {
    for enc in [Encoding::Ownsem, Encoding::Baseline] {
        assert_eq!(verdict("walkthrough_checked.oseair", enc), SatResult::Unsat, "{enc:?}");
    }
}

#[test]
fn typestate_property_is_proved() {
    for enc in [Encoding::Ownsem, Encoding::Baseline] {
        assert_eq!(verdict("typestate.oseair", enc), SatResult::Unsat, "{enc:?}");
    }
}

#[test]
fn weakened_typestate_property_has_replayable_model() {
    let prog = load("typestate_weak.oseair");
    let sites = ownir::ir::nondet_sites(&prog).len();
    for enc in [Encoding::Ownsem, Encoding::Baseline] {
        let SatResult::Sat(model) = verdict("typestate_weak.oseair", enc) else { panic!("expected sat") };
        if enc == Encoding::Ownsem {
            assert!(model.contains_key("proph_7"), "{model:?}");
        }
        let out = m0::run(&prog, nondet_oracle(&model, sites), RunConfig::default()).unwrap();
        assert_eq!(out.verdict(), Verdict::AssertFail);
    }
}

#[test]
fn ownsem_typestate_script_has_no_array_terms() {
    let p = flatten(&load("typestate.oseair")).unwrap();
    let own = encode_ownsem(&p).unwrap();
    let base = encode_baseline(&p).unwrap();
    assert_eq!(own.count_array_ops(), (0, 0));
    let (reads, writes) = base.count_array_ops();
    assert!(reads >= 1 && writes >= 2, "{reads} {writes}");
    let text = to_smtlib(&own).unwrap();
    assert!(text.contains("proph_7"));
}

