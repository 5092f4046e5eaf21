//! Core algorithms for studying EV charging impact on radial distribution feeders.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the study runner
//! and the command-line interface live in the `evgrid` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod charging;
pub mod clustering;
pub mod economics;
pub mod model;
pub mod powerflow;
pub mod study;
pub mod synth;
pub mod upgrade;

mod linalg;

pub use model::{Bus, CustomerClass, Feeder, LineSegment, LoadPoint, PhaseSet, Transformer};

/// Number of hourly steps in a representative day.
pub const HOURS: usize = 24;
