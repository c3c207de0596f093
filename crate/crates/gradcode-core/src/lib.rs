//! Gradient coding for straggler-tolerant synchronous gradient descent.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation:
//!
//! * [`numerics`]: small dense linear algebra and the seeded generator.
//! * [`codec`]: encoding matrices `B` (naive, fractional repetition, cyclic
//!   repetition), lazily derived decoding rows, and exhaustive verification.
//! * [`partial`]: the two-stage naive + coded split for α-partial stragglers.
//! * [`learn`]: logistic regression, the synthetic dataset, AUC and the two
//!   optimizers (Nesterov and decaying-step gradient descent).
//! * [`sim`]: a deterministic discrete-event simulation of one aggregator and
//!   `n` workers, plus training runs and run comparison.
//!
//! File formats and the command line live in the companion `gradcode` crate.
#![no_std]

extern crate alloc;

pub mod codec;
pub mod error;
pub mod learn;
pub mod numerics;
pub mod partial;
pub mod sim;

pub use codec::{CodeKind, DecodeCache, DecodeRow, GradientCode, SurvivorSet};
pub use error::{Error, Result};
pub use numerics::{Mat, Rng};
pub use partial::TwoStagePlan;
