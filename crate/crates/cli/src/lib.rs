//! Library side of the command-line harness: experiment runners and the
//! trace/summary writers, kept callable from the test suites.

pub mod experiments;
pub mod output;
