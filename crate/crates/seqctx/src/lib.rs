//! Command-line tools and JSON file formats for sequential contextuality.

pub mod cli;
pub mod golden;
pub mod io;
