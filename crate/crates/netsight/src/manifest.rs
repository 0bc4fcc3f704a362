//! Run manifests: what went in, what version ran, and the run statistics.

use std::path::Path;

use netsight_core::pipeline::RunStats;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::knowledge_io::{LoadedKnowledge, KNOWLEDGE_FILES};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Keys holding wall-clock times; everything else is deterministic.
pub const WALL_TIME_KEYS: [&str; 2] = ["started_at_unix_ms", "finished_at_unix_ms"];

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash over the knowledge files present in `dir`, in fixed file order.
/// Absent files and absent directories hash distinctly from empty ones.
pub fn knowledge_dir_hash(dir: Option<&Path>) -> std::io::Result<String> {
    let mut h = Sha256::new();
    if let Some(dir) = dir {
        for name in KNOWLEDGE_FILES {
            h.update(name.as_bytes());
            match std::fs::read(dir.join(name)) {
                Ok(bytes) => {
                    h.update([1]);
                    h.update((bytes.len() as u64).to_le_bytes());
                    h.update(&bytes);
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => h.update([0]),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub fn stats_value(s: &RunStats) -> Value {
    json!({
        "ingest": {
            "packets_read": s.ingest.packets_read,
            "bytes_read": s.ingest.bytes_read,
            "errors": s.ingest.errors,
        },
        "truncation": s.truncation.as_ref().map(|e| e.to_string()),
        "decode": {
            "packets_in": s.decode.packets_in,
            "segments": s.decode.segments,
            "truncated_datagrams": s.decode.truncated_datagrams,
            "packet_skips": s.decode.packet_skips.iter().map(|(k, n)| (k.to_string(), json!(n))).collect::<serde_json::Map<_, _>>(),
            "events": s.decode.events.iter().map(|(k, n)| (k.as_str().to_string(), json!(n))).collect::<serde_json::Map<_, _>>(),
            "app_skips": s.decode.app_skips.iter().map(|((p, k), n)| (format!("{}/{k}", p.as_str()), json!(n))).collect::<serde_json::Map<_, _>>(),
            "malformed": s.decode.malformed(),
        },
        "engines": s.engines.iter().map(|e| json!({
            "engine_id": e.engine_id,
            "messages_in": e.messages_in,
            "claims_out": e.claims_out,
        })).collect::<Vec<_>>(),
        "topics": s.topics,
        "dropped_claims": s.dropped_claims,
    })
}

/// An input file named in the manifest.
#[derive(Debug, Clone)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl InputFile {
    pub fn new(path: &Path, bytes: &[u8]) -> Self {
        InputFile {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        }
    }

    fn value(&self) -> Value {
        json!({"path": self.path, "sha256": self.sha256, "bytes": self.bytes})
    }
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub capture: InputFile,
    /// `None` when the built-in default configuration ran.
    pub config: Option<InputFile>,
    pub config_hash: String,
    pub knowledge_dir: Option<String>,
    pub knowledge_dir_hash: String,
    pub policies: Option<InputFile>,
    pub started_at_unix_ms: u128,
    pub finished_at_unix_ms: u128,
}

impl RunManifest {
    pub fn to_json(&self, stats: &RunStats, knowledge: &LoadedKnowledge) -> String {
        let doc = json!({
            "tool": "netsight",
            "version": TOOL_VERSION,
            "inputs": {
                "capture": self.capture.value(),
                "config": self.config.as_ref().map(InputFile::value),
                "knowledge_dir": self.knowledge_dir,
                "policies": self.policies.as_ref().map(InputFile::value),
            },
            "config_hash": self.config_hash,
            "knowledge_dir_hash": self.knowledge_dir_hash,
            "knowledge": {
                "warnings": knowledge.warnings,
                "skipped_lines": knowledge.skipped,
            },
            "started_at_unix_ms": self.started_at_unix_ms as u64,
            "finished_at_unix_ms": self.finished_at_unix_ms as u64,
            "stats": stats_value(stats),
        });
        serde_json::to_string_pretty(&doc).expect("plain json") + "\n"
    }
}

/// `manifest` with wall-clock fields removed, for comparing runs.
pub fn without_wall_times(manifest: &str) -> Option<Value> {
    let mut v: Value = serde_json::from_str(manifest).ok()?;
    let obj = v.as_object_mut()?;
    for k in WALL_TIME_KEYS {
        obj.remove(k);
    }
    Some(v)
}
