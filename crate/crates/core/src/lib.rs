//! Monte Carlo laboratory for one-dimensional random walks in cooling random
//! environment.
//!
//! The walk lives on ℤ. At the deterministic times τ(0) = 0 < τ(1) < ... the
//! whole environment ω is redrawn i.i.d. from a resampling rule α; between
//! refreshes the walker at `x` steps right with probability ω(x). The crate
//! simulates such walks reproducibly in parallel, computes the theoretical
//! scaling targets, and checks the annealed functional limits against
//! simulation and against an exact small-horizon oracle.
//!
//! ```
//! use rwcre::{cooling::CoolingSchedule, env::ResamplingRule, walker};
//!
//! let rule = ResamplingRule::two_point(1.0 / 3.0)?;
//! let schedule = CoolingSchedule::polynomial(1.0, 2.0)?;
//! let path = walker::simulate(&rule, &schedule, 1_000, 42, 0)?;
//! let blocks = walker::decompose(&path, &schedule)?;
//! assert_eq!(blocks.total(), path.end());
//! # Ok::<(), rwcre::Error>(())
//! ```

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cooling;
pub mod env;
mod error;
pub mod quad;
pub mod runner;
pub mod stream;
pub mod theory;
pub mod verify;
pub mod walker;

pub use error::{Error, Result};

// The guide's chapters compile as doctests so their snippets track the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/environments.md")]
    mod environments {}
    #[doc = include_str!("../../../book/src/cooling.md")]
    mod cooling {}
    #[doc = include_str!("../../../book/src/walks.md")]
    mod walks {}
    #[doc = include_str!("../../../book/src/kesten.md")]
    mod kesten {}
    #[doc = include_str!("../../../book/src/scaling.md")]
    mod scaling {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
