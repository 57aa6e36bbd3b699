//! Versioned, checksummed JSON persistence for trained pipelines.
//!
//! File layout:
//! `{"format":"nora-bundle","format_version":N,"checksum":"sha256:<hex>","payload":{...}}`
//! where the checksum covers the payload's bytes exactly as written.

use std::fs;
use std::path::Path;

use nora_core::pipeline::TrainedPipeline;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::{sha256_hex, Error, Result};

pub const BUNDLE_FORMAT: &str = "nora-bundle";
pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    /// SHA-256 of the canonical CSV rendering of the training rows.
    pub dataset_fingerprint: String,
    pub n_train: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineBundle {
    pub format_version: u32,
    pub pipeline: TrainedPipeline,
    pub provenance: Provenance,
}

impl PipelineBundle {
    pub fn new(pipeline: TrainedPipeline, provenance: Provenance) -> Self {
        Self {
            format_version: BUNDLE_FORMAT_VERSION,
            pipeline,
            provenance,
        }
    }
}

#[derive(Deserialize)]
struct Envelope<'a> {
    format: String,
    format_version: u32,
    checksum: String,
    #[serde(borrow)]
    payload: &'a RawValue,
}

pub fn bundle_to_string(bundle: &PipelineBundle) -> Result<String> {
    bundle.pipeline.validate()?;
    let payload =
        serde_json::to_string(bundle).map_err(|e| Error::Internal(format!("bundle serialization: {e}")))?;
    Ok(format!(
        "{{\"format\":\"{BUNDLE_FORMAT}\",\"format_version\":{},\"checksum\":\"sha256:{}\",\"payload\":{payload}}}\n",
        bundle.format_version,
        sha256_hex(payload.as_bytes()),
    ))
}

/// Checks, in order: envelope shape, format name, version, checksum, then
/// payload structure.
pub fn bundle_from_str(text: &str) -> Result<PipelineBundle> {
    let env: Envelope =
        serde_json::from_str(text.trim_end()).map_err(|e| Error::Bundle(format!("corrupted envelope: {e}")))?;
    if env.format != BUNDLE_FORMAT {
        return Err(Error::Bundle(format!("not a bundle (format '{}')", env.format)));
    }
    if env.format_version != BUNDLE_FORMAT_VERSION {
        return Err(Error::Bundle(format!(
            "unsupported format_version {} (this build reads {BUNDLE_FORMAT_VERSION})",
            env.format_version
        )));
    }
    let want = format!("sha256:{}", sha256_hex(env.payload.get().as_bytes()));
    if env.checksum != want {
        return Err(Error::Bundle("checksum mismatch: file is corrupted".into()));
    }
    let bundle: PipelineBundle = serde_json::from_str(env.payload.get())
        .map_err(|e| Error::Bundle(format!("malformed payload: {e}")))?;
    if bundle.format_version != env.format_version {
        return Err(Error::Bundle("payload and envelope versions differ".into()));
    }
    bundle
        .pipeline
        .validate()
        .map_err(|e| Error::Bundle(format!("inconsistent pipeline: {e}")))?;
    Ok(bundle)
}

pub fn save_bundle(bundle: &PipelineBundle, path: &Path) -> Result<()> {
    fs::write(path, bundle_to_string(bundle)?).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(path: &Path) -> Result<PipelineBundle> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    bundle_from_str(&text)
}
