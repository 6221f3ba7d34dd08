//! Keeps the guide in `book/` honest: every chapter is included here so its
//! Rust code blocks run as doctests against the current library.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/variables.md")]
pub mod variables {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/rules.md")]
pub mod rules {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/inference.md")]
pub mod inference {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/scoring.md")]
pub mod scoring {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/supervisor.md")]
pub mod supervisor {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/store.md")]
pub mod store {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/gateway.md")]
pub mod gateway {}
