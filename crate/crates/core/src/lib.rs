// Execution failures carry the partial trace and scene by value.
#![allow(clippy::result_large_err)]

pub mod blockworld;
pub mod config;
pub mod demostore;
pub mod difficulty;
pub mod dsl;
pub mod learner;
pub mod llm;
pub mod orchestrator;
pub mod promptgen;
pub mod tasks;
