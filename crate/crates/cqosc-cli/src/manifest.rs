//! Run manifests: every command writes `manifest.json` embedding the verbatim
//! config text, a content hash of (config bytes, seed), the seed, and the
//! list of written artifacts. No timestamps — reruns must be byte-identical.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::RawConfig;
use crate::CliError;

pub fn content_hash(raw: &RawConfig, seed: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(raw.text.as_bytes());
    hasher.update(seed.to_le_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

pub fn write(
    out_dir: &Path,
    command: &str,
    raw: &RawConfig,
    seed: u64,
    outputs: &[&str],
    metadata: serde_json::Value,
) -> Result<(), CliError> {
    let manifest = serde_json::json!({
        "command": command,
        "seed": seed,
        "config_sha256": content_hash(raw, seed),
        "outputs": outputs,
        "metadata": metadata,
        "config_text": raw.text,
    });
    let body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::io(e.to_string()))?;
    std::fs::write(out_dir.join("manifest.json"), body + "\n")?;
    Ok(())
}

/// Format a float as a decimal string for JSON fields where bit-exactness
/// matters.
pub fn jnum(x: f64) -> serde_json::Value {
    serde_json::Value::String(cqosc::io::fmt_f64(x))
}
