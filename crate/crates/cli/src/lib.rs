//! Operational shell around the recourse engine: artifact handling, the
//! HTTP session service and the command-line verbs.

pub mod api;
pub mod artifacts;
pub mod commands;
pub mod registry;
pub mod service;
pub mod store;
