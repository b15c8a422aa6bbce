//! Binary model format: `b"QNN1"`, a little-endian `u32` manifest length, the
//! UTF-8 JSON manifest, then every tensor listed in the manifest as raw
//! little-endian f64 values in manifest order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::network::{Network, NetworkConfig};

pub const MAGIC: &[u8; 4] = b"QNN1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config: NetworkConfig,
    pub tensors: Vec<TensorEntry>,
}

pub fn model_to_bytes(net: &Network) -> Vec<u8> {
    let tensors = net.named_tensors();
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config: net.config().clone(),
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let payload: usize = tensors.iter().map(|(_, t)| t.len() * 8).sum();
    let mut out = Vec::with_capacity(8 + json.len() + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<Network> {
    if bytes.len() < 4 {
        return Err(NnError::Truncated("magic bytes".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(NnError::BadMagic);
    }
    let len_bytes: [u8; 4] = bytes
        .get(4..8)
        .ok_or_else(|| NnError::Truncated("manifest length".into()))?
        .try_into()
        .expect("four bytes");
    let len = u32::from_le_bytes(len_bytes) as usize;
    let json = bytes
        .get(8..8 + len)
        .ok_or_else(|| NnError::Truncated("manifest".into()))?;
    let manifest: Manifest =
        serde_json::from_slice(json).map_err(|e| NnError::Format(format!("manifest is not valid JSON: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(NnError::VersionMismatch {
            found: manifest.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let mut net = Network::new(manifest.config, 0)?;
    let mut targets = net.named_tensors_mut();
    if targets.len() != manifest.tensors.len() {
        return Err(NnError::Format(format!(
            "manifest lists {} tensors, configuration defines {}",
            manifest.tensors.len(),
            targets.len()
        )));
    }
    let mut offset = 8 + len;
    for (entry, (name, tensor)) in manifest.tensors.iter().zip(targets.iter_mut()) {
        if entry.name != *name || entry.shape != tensor.shape() {
            return Err(NnError::Format(format!(
                "tensor {} {:?} does not match configuration ({name} {:?})",
                entry.name,
                entry.shape,
                tensor.shape()
            )));
        }
        let n = tensor.len() * 8;
        let raw = bytes
            .get(offset..offset + n)
            .ok_or_else(|| NnError::Truncated(format!("tensor {}", entry.name)))?;
        for (v, chunk) in tensor.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("eight bytes"));
        }
        offset += n;
    }
    if offset != bytes.len() {
        return Err(NnError::Format(format!("{} unexpected trailing bytes", bytes.len() - offset)));
    }
    Ok(net)
}

pub fn save_model(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_bytes(net))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network> {
    model_from_bytes(&fs::read(path)?)
}
