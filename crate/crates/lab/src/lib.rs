//! Command-line experiments for the NLS-Szegő equation: simulations,
//! turbulence and stability sweeps, and verification suites, each writing a
//! replayable manifest.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod init;
pub mod output;

pub use cli::main_with_args;
pub use error::{exit, LabError, LabResult};
pub use output::RunManifest;
