//! Compiles the Rust snippets of the guide in `book/` as doc tests, one
//! module per chapter, so `cargo test` keeps the book honest.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/densities.md")]
pub mod densities {}
#[doc = include_str!("../../../book/src/games.md")]
pub mod games {}
#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}
#[doc = include_str!("../../../book/src/equilibria.md")]
pub mod equilibria {}
#[doc = include_str!("../../../book/src/tabular.md")]
pub mod tabular {}
#[doc = include_str!("../../../book/src/parametric.md")]
pub mod parametric {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
