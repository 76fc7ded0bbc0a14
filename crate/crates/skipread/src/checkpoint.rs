//! Versioned parameter container. One JSON file per trained model: every
//! parameter group appears under its stable name with an explicit shape and
//! the raw little-endian f64 payload (base64), so round-trips are bit-exact
//! and the format is inspectable with standard tools.

use crate::nn::Parameterized;
use crate::{Error, Result};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Group {
    shape: Vec<usize>,
    /// base64 of the little-endian f64 payload
    data: String,
}

#[derive(Serialize, Deserialize)]
struct Container {
    format: String,
    version: u32,
    meta: BTreeMap<String, String>,
    groups: BTreeMap<String, Group>,
}

fn encode(data: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    B64.encode(bytes)
}

fn decode(s: &str, expect: usize, name: &str) -> Result<Vec<f64>> {
    let bytes = B64
        .decode(s)
        .map_err(|e| Error::Checkpoint(format!("group {name}: bad base64: {e}")))?;
    if bytes.len() != expect * 8 {
        return Err(Error::Checkpoint(format!(
            "group {name}: payload holds {} bytes, shape expects {}",
            bytes.len(),
            expect * 8
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn save<P: Parameterized>(
    path: &Path,
    model: &P,
    meta: &BTreeMap<String, String>,
) -> Result<()> {
    let mut groups = BTreeMap::new();
    for name in model.param_names() {
        let t = model.param(name);
        groups.insert(
            name.to_string(),
            Group { shape: t.shape.clone(), data: encode(&t.data) },
        );
    }
    let container = Container {
        format: "skipread-params".to_string(),
        version: FORMAT_VERSION,
        meta: meta.clone(),
        groups,
    };
    let json = serde_json::to_string_pretty(&container)?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Loads a checkpoint into an already-constructed model. Every group must be
/// present with a matching shape; extra groups in the file are an error, so a
/// config/checkpoint mismatch is caught here rather than as NaNs later.
pub fn load_into<P: Parameterized>(path: &Path, model: &mut P) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let container: Container = serde_json::from_str(&text)?;
    if container.version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {} unsupported (expected {})",
            container.version, FORMAT_VERSION
        )));
    }
    let names = model.param_names();
    for name in &names {
        let group = container.groups.get(*name).ok_or_else(|| {
            Error::Checkpoint(format!("missing parameter group {name}"))
        })?;
        let t = model.param_mut(name);
        if group.shape != t.shape {
            return Err(Error::Checkpoint(format!(
                "group {name}: checkpoint shape {:?} != model shape {:?}",
                group.shape, t.shape
            )));
        }
        t.data = decode(&group.data, t.numel(), name)?;
    }
    if container.groups.len() != names.len() {
        let extra: Vec<_> = container
            .groups
            .keys()
            .filter(|k| !names.contains(&k.as_str()))
            .cloned()
            .collect();
        return Err(Error::Checkpoint(format!(
            "checkpoint has unexpected groups: {extra:?}"
        )));
    }
    Ok(container.meta)
}
