//! Interpreter and runtime-enforcement toolchain for BIP-style component systems.

pub mod model;
pub mod semantics;
pub mod property;
pub mod enforce;
pub mod transform;
pub mod bench;
pub mod runner;
