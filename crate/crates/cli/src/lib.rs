//! IO, file formats, configuration and parallel drivers around
//! `kronspec-core`, plus the `kronspec` command-line binary.

pub mod config;
pub mod driver;
pub mod formats;
pub mod preprocess;
