//! Clarity: an information measure on `[0, 1]` derived from differential
//! entropy, together with the machinery built on top of it.
//!
//! * [`info`]: clarity/entropy conversions and estimation-error bounds.
//! * [`belief`]: Kalman-filter clarity and covariance dynamics, the closed-form
//!   scalar solution and its inverse.
//! * [`ode`]: fixed-step RK4 integration.
//! * [`models`]: vehicle dynamics, flow fields, sensing footprints and the
//!   clarity-augmented system.
//! * [`hjb`]: grid-based HJB solver for perceivability, optimal control
//!   extraction and closed-loop rollouts.
//! * [`coverage`]: clarity maps and greedy/ergodic coverage controllers.
//! * [`cbf`]: clarity-aware control barrier function and QP safety filter.
//!
//! The crate is `no_std` (with `alloc`). The `std` feature is on by default;
//! `parallel` enables data-parallel HJB sweeps through rayon.

#![no_std]
// `!(a > b)` is the NaN-rejecting form used throughout validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the component-wise numerics they implement.
#![allow(clippy::needless_range_loop)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod belief;
pub mod cbf;
pub mod coverage;
mod error;
pub mod hjb;
pub mod info;
pub mod models;
pub mod ode;

pub use error::{Error, Result};
