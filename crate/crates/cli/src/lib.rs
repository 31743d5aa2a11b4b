//! Command-line front end and triage service for `flowstate`.

pub mod commands;
pub mod journal;
pub mod service;
