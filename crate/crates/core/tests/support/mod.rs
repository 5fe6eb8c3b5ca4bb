//! Independent oracles shared by the integration tests and the acceptance
//! harness. Each including test uses only part of them.
#![allow(dead_code)]

pub mod gradcheck;
pub mod grid_reachability;
pub mod shell;
