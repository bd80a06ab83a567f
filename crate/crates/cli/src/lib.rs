//! Command line driver and HTTP service.

pub mod commands;
pub mod service;
