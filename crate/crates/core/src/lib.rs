//! Core library for simulating one-dimensional random planar fractals
//! (grid and disc branching constructions) and computing their projection
//! and Favard-length statistics.
//!
//! The crate is `no_std` + `alloc`; all floating-point transcendentals go
//! through [`math`] (libm) so results are bit-identical across std and
//! no_std builds. Everything here is pure computation: IO, CLI and
//! parallel drivers live in the companion `favard-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod address;
pub mod asymptotics;
pub mod diagnostics;
pub mod error;
pub mod favard;
pub mod geometry;
pub mod math;
pub mod models;
pub mod quad;
pub mod rng;
pub mod survival;

pub use error::{Error, Result};
pub use quad::{QuadValue, QuadratureRule};
pub use rng::Key;
