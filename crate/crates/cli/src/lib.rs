//! Frame I/O, dataset handling and the `run`, `eval` and `bench` commands of
//! the `bias` binary.

pub mod commands;
pub mod dataset;
pub mod error;
pub mod io;
pub mod synth;

pub use error::{CliError, Result};
