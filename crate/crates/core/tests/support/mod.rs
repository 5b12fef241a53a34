//! Shared by the core integration tests and the acceptance target.
#![allow(dead_code)]

pub mod fixtures;
pub mod oracles;
pub mod properties;
