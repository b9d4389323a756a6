//! Library side of the experiment harness: configuration parsing, cell
//! orchestration, and report emission. The `himars` binary is a thin CLI
//! over these modules, and the integration tests drive them directly.

pub mod config;
pub mod experiment;
pub mod reports;
