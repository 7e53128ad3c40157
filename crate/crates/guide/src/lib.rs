//! The chapters of the book, compiled so that `cargo test --doc` runs every
//! snippet in them.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/descent.md")]
pub mod descent {}
#[doc = include_str!("../../../book/src/substitutes.md")]
pub mod substitutes {}
#[doc = include_str!("../../../book/src/priors.md")]
pub mod priors {}
#[doc = include_str!("../../../book/src/empirical.md")]
pub mod empirical {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
