//! Experiment runner for the `bcel` command: TOML configs in, CSV files out.
//!
//! Every output directory gets a `manifest.toml` that is itself a config;
//! running it again reproduces the CSVs byte for byte.
//!
//! # Output schemas
//!
//! | file | columns |
//! |------|---------|
//! | `sample.csv` | `iter,weight,theta_1..theta_d` |
//! | `summary.csv` | `param,mean,sd,median,lower,upper,ess` |
//! | `compare.csv` | `label,param,mean,sd,median,lower,upper,ess` |
//! | `hist_<label>.csv` | `param,lo,hi,mass` |
//! | `metrics.csv` | `param,rmse_<method>..,mad_<method>..,coverage_<method>..` |
//! | `failures.csv` | `replicate,method,message` |

pub mod commands;
pub mod config;
pub mod error;
pub mod model;

pub use commands::{cmd_compare, cmd_replicate, cmd_run, cmd_simulate};
pub use config::ExperimentConfig;
pub use error::CliError;
