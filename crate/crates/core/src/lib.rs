//! Ownership-aware intermediate representation with concrete reference machines,
//! a verification-condition generator, and a differential testing harness.

pub mod ir;
pub mod machine;
pub mod text;
pub mod smt;
pub mod vcgen;
pub mod harness;
