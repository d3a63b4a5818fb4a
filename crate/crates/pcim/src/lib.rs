//! File formats, persistence, benchmarks and the command-line interface
//! around [`pcim_core`].

pub mod bench;
pub mod cli;
pub mod disk;
pub mod persist;
pub mod presets;
