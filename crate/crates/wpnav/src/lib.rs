//! Files, run directories, plots and the command line for `wpnav-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod plot;
pub mod rundir;
