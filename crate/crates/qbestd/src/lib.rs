//! Host-side half of the spoken term detection toolkit: audio and feature
//! file formats, dataset manifests, the multi-threaded corpus scan, report
//! emission and the `qbestd` command-line driver. The numerical kernels
//! live in `qbestd-core` and are re-exported as [`core`].

use std::path::PathBuf;

pub use qbestd_core as core;

pub mod cli;
pub mod config;
pub mod featio;
pub mod mdsout;
pub mod report;
pub mod search;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: corrupt file: {msg}", path.display())]
    Corrupt { path: PathBuf, msg: String },
    #[error("{}: unsupported format: {msg}", path.display())]
    UnsupportedFormat { path: PathBuf, msg: String },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Core(#[from] qbestd_core::Error),
    #[error("{0}")]
    Invalid(String),
}
