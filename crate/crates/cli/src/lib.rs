//! Configuration, experiment runner and result comparison behind the
//! `qubofl` binary.

pub mod compare;
pub mod config;
pub mod runner;

pub use compare::{compare, Comparison};
pub use config::Config;
pub use runner::{run, RunOptions, RunReport};
