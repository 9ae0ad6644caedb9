//! Library side of the `qlode` command line tool: documents, exit codes and
//! the command implementations.

pub mod commands;
pub mod document;
pub mod error;
