//! Dataset loaders, bundle persistence, run configuration and the `nora`
//! command-line driver on top of [`nora_core`].

pub mod bundle;
pub mod cli;
pub mod config;
pub mod dataio;
mod error;
pub mod export;
pub mod manifest;

pub use error::{Error, Result, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL};

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
