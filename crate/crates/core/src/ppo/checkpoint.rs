//! Policy checkpoints as JSON:
//!
//! ```text
//! {"format":"fr3coex-policy","version":1,
//!  "dims":{"obs_dim":5,"n_continuous":25,"n_binary":8,"hidden":[64,64]},
//!  "params":{...}}
//! ```
//!
//! Floats are written with shortest round-trip formatting, so save/load is
//! bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::policy::{PolicyDims, PolicyParams};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "fr3coex-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    dims: PolicyDims,
}

#[derive(Serialize, Deserialize)]
struct File {
    format: String,
    version: u32,
    dims: PolicyDims,
    params: PolicyParams,
}

pub fn to_json(params: &PolicyParams) -> Result<String> {
    params.validate()?;
    Ok(serde_json::to_string(&File {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        dims: params.dims.clone(),
        params: params.clone(),
    })?)
}

fn check_header(h: &Header) -> Result<()> {
    if h.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!(
            "not a policy checkpoint: {:?}",
            h.format
        )));
    }
    if h.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            h.version
        )));
    }
    Ok(())
}

/// Parses a checkpoint. With `expected` set, the stored architecture must match.
pub fn from_json(text: &str, expected: Option<&PolicyDims>) -> Result<PolicyParams> {
    let header: Header = serde_json::from_str(text)
        .map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
    check_header(&header)?;
    if let Some(want) = expected {
        if *want != header.dims {
            return Err(Error::Checkpoint(format!(
                "architecture mismatch: expected obs {} / continuous {} / binary {} / hidden {:?}, \
                 checkpoint has obs {} / continuous {} / binary {} / hidden {:?}",
                want.obs_dim,
                want.n_continuous,
                want.n_binary,
                want.hidden,
                header.dims.obs_dim,
                header.dims.n_continuous,
                header.dims.n_binary,
                header.dims.hidden
            )));
        }
    }
    let file: File = serde_json::from_str(text)
        .map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
    if file.params.dims != header.dims {
        return Err(Error::Checkpoint(
            "header dims disagree with parameters".into(),
        ));
    }
    file.params
        .validate()
        .map_err(|e| Error::Checkpoint(format!("invalid parameters: {e}")))?;
    Ok(file.params)
}

pub fn save_params(params: &PolicyParams, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(params)?)?;
    Ok(())
}

pub fn load_params(path: &Path, expected: Option<&PolicyDims>) -> Result<PolicyParams> {
    from_json(&std::fs::read_to_string(path)?, expected)
}
