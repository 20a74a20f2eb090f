//! Command-line front end and local review service.

pub mod server;
