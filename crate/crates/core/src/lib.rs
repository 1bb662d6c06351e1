//! Step-frequency compressive-sensing MIMO radar.
//!
//! A small wireless network of single-antenna nodes acts as a colocated MIMO
//! radar. Receive nodes compress their pulse returns with random Gaussian
//! matrices and a fusion center recovers target angle, radial speed and range
//! by sparse recovery over a discretized parameter grid. Stepping the carrier
//! from pulse to pulse makes range observable and pushes the velocity
//! ambiguity out; a three-stage decoupled estimator keeps the sparse solves
//! small.
//!
//! The crate is `no_std` with `alloc`. File formats, the command line and the
//! Monte Carlo harness live in the `stepfreq` crate.

#![no_std]
// `!(x > 0.0)` guards reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod rng;
pub mod scene;
pub mod sensing;
pub mod solver;
pub mod synth;
pub mod waveform;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
pub use scene::{Jammer, PolarNode, Scenario, Target, SPEED_OF_LIGHT};
