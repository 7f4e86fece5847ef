//! Lattice sums over `SL₂(ℤ)`, their analytic continuation, and numerical
//! checks of the identities they satisfy.
//!
//! The guide in `book/` walks through the modules; its code samples are
//! compiled and run as doc-tests of this crate.

pub mod arith;
pub mod cli;
pub mod continuation;
pub mod error;
pub mod identities;
pub mod latsum;
pub mod modforms;
pub mod point;
pub mod special;
pub mod sum;

pub use error::{Error, Result};
pub use point::{IntMatrix2, UpperHalfPoint};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lattice-sums.md")]
    mod lattice_sums {}
    #[doc = include_str!("../../../book/src/arithmetic.md")]
    mod arithmetic {}
    #[doc = include_str!("../../../book/src/continuation.md")]
    mod continuation {}
    #[doc = include_str!("../../../book/src/modular-forms.md")]
    mod modular_forms {}
    #[doc = include_str!("../../../book/src/identities.md")]
    mod identities {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
