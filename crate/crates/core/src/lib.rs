//! Partially observed regime-switching optimal dividends with entropy-regularized
//! exploration.
//!
//! The crate is `no_std` (with `alloc`). It holds the closed-form model math, the
//! ground-truth market simulator, the discretized Wonham filter, parameter estimators,
//! the finite-difference benchmark and the actor-critic learner. File formats, the CLI
//! and parallel batch drivers live in the `podiv` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod error;
pub mod estimate;
pub mod eval;
pub mod fd;
pub mod filter;
pub mod market;
pub mod model;
pub mod num;
pub mod params;
pub mod policy;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use params::{ControlConfig, EnvParams};
