use ownir::harness::{enumerate_oracles, gen_checked, GenConfig};
use ownir::ir::{flatten, nondet_sites, Level};
use ownir::machine::m0;
use ownir::machine::RunConfig;
use ownir::text::{parse, print};
use proptest::prelude::*;

fn small(seed: u64, level: Level) -> GenConfig {
    GenConfig { max_blocks: 5, max_instrs: 10, nondet_budget: 2, level, ..GenConfig::with_seed(seed) }
}

fn level() -> impl Strategy<Value = Level> {
    prop_oneof![Just(Level::M1), Just(Level::M2)]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn printed_programs_parse_back(seed in any::<u64>(), level in level()) {
        let p = gen_checked(&small(seed, level));
        let text = print(&p);
        let q = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&q, &p);
        prop_assert_eq!(print(&q), text);
    }

    #[test]
    fn flattening_preserves_every_run(seed in any::<u64>(), level in level()) {
        let p = gen_checked(&small(seed, level));
        let f = flatten(&p).unwrap();
        prop_assert_eq!(f.blocks.len(), 1);
        prop_assert_eq!(nondet_sites(&f).len(), nondet_sites(&p).len());
        for o in enumerate_oracles(&p).unwrap() {
            let a = m0::run(&p, o.clone(), RunConfig::default()).unwrap().verdict();
            let b = m0::run(&f, o.clone(), RunConfig::default()).unwrap().verdict();
            prop_assert_eq!(a, b, "oracle {:?}", o.values);
        }
    }

    #[test]
    fn parser_never_panics(src in "\\PC{0,200}") {
        let _ = parse(&src);
    }

    #[test]
    fn parser_survives_truncation(seed in any::<u64>(), cut in 0.0f64..1.0) {
        let text = print(&gen_checked(&small(seed, Level::M1)));
        let mut at = (text.len() as f64 * cut) as usize;
        while !text.is_char_boundary(at) {
            at -= 1;
        }
        let _ = parse(&text[..at]);
    }
}
