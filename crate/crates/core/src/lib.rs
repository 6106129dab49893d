pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod model;
pub mod render;
pub mod rng;
pub mod train;
pub mod workers;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
