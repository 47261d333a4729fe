//! Configuration, command line, run directories and the live-play server
//! built on `hipt-core`.

pub mod agents;
pub mod cli;
pub mod config;
pub mod protocol;
pub mod rundir;
pub mod server;
pub mod session;
