//! Standard-library companion of `tassim-core`: configuration files, CSV
//! artifacts, SVG charts and the command-line interface.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod svg;
