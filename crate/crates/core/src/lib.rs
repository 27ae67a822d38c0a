//! Deterministic simulation of anonymous consensus and coordination
//! protocols over the abstract MAC layer and over fair-lossy channels, with
//! exact-arithmetic trace checkers and a Monte Carlo experiment harness.

pub mod approximate;
pub mod checkers;
pub mod dyadic;
pub mod error;
pub mod harness;
pub mod lossy;
pub mod randomized;
pub mod sim;
pub mod stats;
pub mod store_collect;

pub use error::ConfigError;
