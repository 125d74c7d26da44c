//! Library surface of the workbench CLI, kept separate from the binary so
//! integration tests can drive the commands directly.

pub mod commands;
pub mod serve;
