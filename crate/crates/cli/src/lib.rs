//! Library surface of the command-line front end: scenario and network file
//! formats, artifact renderers, and the subcommand implementations. The
//! binary in `main.rs` is a thin argument-parsing shell over this, and the
//! integration tests call into it directly.

pub mod commands;
pub mod netfile;
pub mod output;
pub mod scenario;
