//! Command-line laboratory around `hwy-core`: configuration, function
//! specs, reports, the kernel cache, and the numerical checks.

pub mod cache;
pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod report;
pub mod spec;
pub mod suite;

pub use config::{Lab, LabConfig, SphereRes};
pub use error::{LabError, LabResult};
