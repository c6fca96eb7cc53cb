//! File formats, command-line tool and HTTP service around the core toolkit.

pub mod cli;
pub mod error;
pub mod io;
pub mod service;
pub mod simulation;
pub mod tables;

pub use error::{AppError, AppResult};
