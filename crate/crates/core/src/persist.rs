//! JSON manifest + little-endian `f64` sidecar storage shared by shape
//! models and network weights.
//!
//! The manifest lives at `<stem>.json`, the sidecar at `<stem>.bin`. Each
//! array is addressed by a byte offset and an element count.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("payload {path} has {found} bytes, manifest requires {expected}")]
    Truncated {
        path: String,
        found: usize,
        expected: usize,
    },
    #[error("inconsistent model file: {0}")]
    Inconsistent(String),
}

/// Location of one array inside the sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    /// Byte offset from the start of the sidecar.
    pub offset: usize,
    /// Number of `f64` elements.
    pub len: usize,
}

impl Segment {
    fn end(&self) -> usize {
        self.offset + self.len * 8
    }
}

/// Sidecar path for a manifest: a trailing `.json` becomes `.bin`.
pub fn sidecar_path(manifest: &Path) -> PathBuf {
    let name = manifest
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let bin = match name.strip_suffix(".json") {
        Some(stem) => format!("{stem}.bin"),
        None => format!("{name}.bin"),
    };
    manifest.with_file_name(bin)
}

/// Concatenates arrays into a little-endian payload and returns their segments.
pub fn pack(arrays: &[&[f64]]) -> (Vec<u8>, Vec<Segment>) {
    let total: usize = arrays.iter().map(|a| a.len()).sum();
    let mut bytes = Vec::with_capacity(total * 8);
    let mut segments = Vec::with_capacity(arrays.len());
    for a in arrays {
        segments.push(Segment {
            offset: bytes.len(),
            len: a.len(),
        });
        for x in *a {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    (bytes, segments)
}

/// Extracts one segment, checking bounds against the payload.
pub fn unpack(bytes: &[u8], seg: Segment, path: &Path) -> Result<Vec<f64>, PersistError> {
    if !seg.offset.is_multiple_of(8) {
        return Err(PersistError::Inconsistent(format!(
            "segment offset {} is not 8-byte aligned",
            seg.offset
        )));
    }
    if seg.end() > bytes.len() {
        return Err(PersistError::Truncated {
            path: path.display().to_string(),
            found: bytes.len(),
            expected: seg.end(),
        });
    }
    Ok(bytes[seg.offset..seg.end()]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Writes a manifest and its sidecar.
pub fn write_pair<M: Serialize>(manifest_path: &Path, manifest: &M, payload: &[u8]) -> Result<(), PersistError> {
    let json = serde_json::to_string_pretty(manifest).map_err(|source| PersistError::Json {
        path: manifest_path.display().to_string(),
        source,
    })?;
    write_file(manifest_path, json.as_bytes())?;
    write_file(&sidecar_path(manifest_path), payload)
}

/// Reads a manifest and its sidecar bytes. The sidecar must be exactly
/// `expected_bytes(manifest)` long.
pub fn read_pair<M: DeserializeOwned>(
    manifest_path: &Path,
    expected_bytes: impl FnOnce(&M) -> usize,
) -> Result<(M, Vec<u8>), PersistError> {
    let text = read_file(manifest_path)?;
    let manifest: M = serde_json::from_slice(&text).map_err(|source| PersistError::Json {
        path: manifest_path.display().to_string(),
        source,
    })?;
    let bin_path = sidecar_path(manifest_path);
    let bytes = read_file(&bin_path)?;
    let expected = expected_bytes(&manifest);
    if bytes.len() < expected {
        return Err(PersistError::Truncated {
            path: bin_path.display().to_string(),
            found: bytes.len(),
            expected,
        });
    }
    if bytes.len() > expected {
        return Err(PersistError::Inconsistent(format!(
            "payload {} has {} bytes, manifest describes {}",
            bin_path.display(),
            bytes.len(),
            expected
        )));
    }
    Ok((manifest, bytes))
}

/// Checks that segments are laid out back to back from offset 0 and
/// returns the total payload size in bytes.
pub fn contiguous_size(segments: &[Segment]) -> Option<usize> {
    let mut at = 0;
    for s in segments {
        if s.offset != at {
            return None;
        }
        at = s.end();
    }
    Some(at)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PersistError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| PersistError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| PersistError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, PersistError> {
    fs::read(path).map_err(|source| PersistError::Io {
        path: path.display().to_string(),
        source,
    })
}
