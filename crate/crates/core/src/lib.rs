//! Failure-mode reasoning for function-block programs.

pub mod catalog;
pub mod engine;
pub mod mode;
pub mod oracle;
pub mod program;
pub mod quantify;
pub mod report;
pub mod synth;
