//! Command line and HTTP front ends for `archmap`.

pub mod api;
pub mod commands;
pub mod error;
pub mod session;
