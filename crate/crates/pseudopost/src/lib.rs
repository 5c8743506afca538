//! File formats, experiment drivers and the command-line front end for
//! [`pseudopost_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod manifest;

pub use error::{exit, AppError, AppResult};
