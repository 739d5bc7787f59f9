//! Checks shared by the core integration tests and the acceptance target.
#![allow(dead_code)]

pub mod gradients;
pub mod oracles;
