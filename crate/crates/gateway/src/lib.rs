//! HTTP API and command-line front end of the gapquest engine.

pub mod api;
pub mod cli;
pub mod tokens;
