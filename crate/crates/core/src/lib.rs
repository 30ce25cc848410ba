//! Explicit rate functionals for Kronecker's lemma and the strong law of large
//! numbers on type-p spaces, together with the machinery needed to check them:
//! exact rational arithmetic, exhaustive enumeration of small independent
//! processes, seeded Monte-Carlo estimation and Specker-style adversaries.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and the
//! command-line front end live in the `kronrate` companion crate.
//!
//! Module map:
//!
//! * [`rates`]: rate of convergence / metastability types and the lifts between them.
//! * [`space`]: finite-dimensional normed spaces, vector and weight sequences.
//! * [`kronecker`]: the finitary Kronecker functional and its metastable rate.
//! * [`prob_kronecker`]: the probabilistic Kronecker functional, finiteness rates.
//! * [`chung`]: rates for Chung's strong law on type-p spaces.
//! * [`transfer`]: the deterministic-to-probabilistic transfer construction.
//! * [`adversarial`]: constructions refuting candidate computable rates.
//! * [`engine`]: exact and Monte-Carlo probability engines.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adversarial;
pub mod chung;
pub mod engine;
mod error;
pub mod kronecker;
pub mod num;
pub mod prob_kronecker;
pub mod rates;
pub mod space;
pub mod transfer;

pub use error::{Error, Result};
pub use num::{Interval, Rat};
