//! Command-line entry points and the interactive labeling service.

pub mod cli;
pub mod service;
