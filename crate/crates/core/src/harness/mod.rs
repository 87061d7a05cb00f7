//! Program generation, differential checking and benchmarks.

pub mod bench;
pub mod check;
pub mod corpus;
pub mod gen;
pub mod m3;

pub use check::{
    cache_violation, enumerate_oracles, exhaustive_verdict, gen_checked, sample_oracles, shrink,
    three_way_check, CheckConfig, CheckError, Concrete, ThreeWay,
};
pub use gen::{gen_program, GenConfig, OpMix};
pub use m3::{check_m3, gen_m3, M3Case};
pub use bench::{run_bench, BenchReport, BenchSpec, Family, Mode};
pub use corpus::{check_program, corpus_program, run_corpus, CorpusOptions, CorpusReport, Failure, Finding};
