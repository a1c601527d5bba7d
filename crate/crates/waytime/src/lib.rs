//! Std companion of `waytime-core`: file formats, checkpoints, parallel
//! dataset labeling and the `waytime` command-line tool.

pub mod checkpoint;
pub mod cli;
mod error;
pub mod formats;
pub mod hash;
pub mod label;
pub mod manifest;
pub mod models;

pub use error::{Error, Result};
