//! Library half of the `povm-lab` command: configuration parsing and the
//! mode drivers, kept out of `main` so tests can call them directly.

pub mod config;
pub mod run;
