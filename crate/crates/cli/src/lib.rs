//! Command-line front end: document parsing, analysis commands and reports.

pub mod app;
pub mod commands;
pub mod document;
pub mod error;
pub mod report;
pub mod spec;
