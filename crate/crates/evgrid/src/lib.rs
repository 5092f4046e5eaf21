//! File formats, study runner and command-line front end for `evgrid-core`.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod io;
pub mod manifest;
pub mod report;
pub mod runner;

pub use error::{Error, Result};
