//! File formats, pipeline stages and the command line for adversarial
//! camouflage patches, built on `aerocamo-core`.

pub mod annotations;
pub mod cli;
pub mod colors;
pub mod config;
pub mod error;
pub mod imageio;
pub mod manifest;
pub mod patchio;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod run;
pub mod weights;

pub use aerocamo_core as core;
pub use error::{AppError, Result};
