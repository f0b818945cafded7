//! Library surface of the experiment runner: configuration, orchestration
//! and result persistence. The binary in `main.rs` is a thin argument
//! parser over these modules.

pub mod config;
pub mod experiments;
pub mod output;
