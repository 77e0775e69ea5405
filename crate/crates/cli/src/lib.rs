//! Command implementations behind the `strider` binary: run configuration,
//! training orchestration, evaluation reports, ablations, perturbed-physics
//! evaluation and plotting.

pub mod ablate;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod plot;
pub mod sim2sim;
pub mod train;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
