//! The book's chapters as modules, so that `cargo test --doc` runs every
//! snippet in `book/src`. One module per chapter keeps doc-test names
//! traceable to the Markdown file they came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/populations.md")]
pub mod populations {}
#[doc = include_str!("../../../book/src/designs.md")]
pub mod designs {}
#[doc = include_str!("../../../book/src/estimators.md")]
pub mod estimators {}
#[doc = include_str!("../../../book/src/parameters.md")]
pub mod parameters {}
#[doc = include_str!("../../../book/src/variance.md")]
pub mod variance {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/comparisons.md")]
pub mod comparisons {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
