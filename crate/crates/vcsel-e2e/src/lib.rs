//! Simulation and learning toolkit for VCSEL-based short-reach optical links.
//!
//! The physical link (rate-equation laser, fiber, photodiode) lives in
//! [`vcsel`] and [`channel`]; [`surrogate`] fits differentiable stand-ins for
//! the laser; [`compensate`] and [`e2e`] train equalizers, predistorters and
//! autoencoder transceivers on top of them. [`nncore`] is the small neural
//! network engine used everywhere, and [`cli`] drives named experiments from
//! TOML configs.

// `!(x > 0.0)` is how NaN is rejected; index loops mirror the maths
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod cli;
pub mod compensate;
pub mod e2e;
pub mod error;
pub mod nncore;
pub mod seed;
pub mod signal;
pub mod surrogate;
pub mod sweep;
pub mod vcsel;

pub use error::{Error, Result};
