//! Persistent panel archive: a JSON envelope carrying the panel together
//! with a SHA-256 checksum of its canonical serialization, verified on load.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::TradeFlowPanel;

/// Bumped whenever the serialized panel layout changes incompatibly.
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Envelope {
    version: u32,
    /// hex SHA-256 of the `panel` field's JSON serialization
    checksum: String,
    panel: serde_json::Value,
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Serializes the panel, embedding a checksum over the panel JSON.
pub fn to_json(panel: &TradeFlowPanel) -> Result<String> {
    let panel_value = serde_json::to_value(panel)?;
    let canonical = serde_json::to_vec(&panel_value)?;
    let envelope = Envelope {
        version: ARCHIVE_VERSION,
        checksum: hex_digest(&canonical),
        panel: panel_value,
    };
    Ok(serde_json::to_string(&envelope)?)
}

/// Parses an archive, verifying version and checksum, and rebuilds the
/// registry indices.
pub fn from_json(text: &str) -> Result<TradeFlowPanel> {
    let envelope: Envelope =
        serde_json::from_str(text).map_err(|e| Error::ArchiveFormat(e.to_string()))?;
    if envelope.version != ARCHIVE_VERSION {
        return Err(Error::ArchiveFormat(format!(
            "unsupported archive version {} (expected {ARCHIVE_VERSION})",
            envelope.version
        )));
    }
    let canonical = serde_json::to_vec(&envelope.panel)?;
    let computed = hex_digest(&canonical);
    if computed != envelope.checksum {
        return Err(Error::ChecksumMismatch {
            stored: envelope.checksum,
            computed,
        });
    }
    let mut panel: TradeFlowPanel = serde_json::from_value(envelope.panel)?;
    panel.reindex();
    Ok(panel)
}

/// Writes an archive file.
pub fn save(panel: &TradeFlowPanel, path: &Path) -> Result<()> {
    let text = to_json(panel)?;
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Reads and verifies an archive file.
pub fn load(path: &Path) -> Result<TradeFlowPanel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    from_json(&text)
}
