//! Doc-test shim: mdbook cannot run a book's code blocks against crate
//! dependencies, so each chapter is included here as module
//! documentation and `cargo test --doc` executes every `rust` fence.
//! Keep the module list in sync with book/src/SUMMARY.md.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/priors-and-oracles.md")]
pub mod priors_and_oracles {}

#[doc = include_str!("../../../book/src/estimating-the-marginal.md")]
pub mod estimating_the_marginal {}

#[doc = include_str!("../../../book/src/shrinkage-rules.md")]
pub mod shrinkage_rules {}

#[doc = include_str!("../../../book/src/realizability.md")]
pub mod realizability {}

#[doc = include_str!("../../../book/src/command-line.md")]
pub mod command_line {}
