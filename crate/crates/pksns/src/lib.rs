//! Configuration, scenario drivers, CSV and checkpoint formats for the
//! `pksns-core` solver. The `pksns` binary wraps [`scenarios::run`].

pub mod checkpoint;
pub mod config;
pub mod csvio;
pub mod error;
pub mod fft;
pub mod scenarios;

pub use config::{RunConfig, Scenario};
pub use error::{Error, Result};
