use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::model::EpochMs;

use super::IngestError;

/// One quarantined payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadLetterEntry {
    pub recv_ts: EpochMs,
    pub market: String,
    pub feed: String,
    pub reason: String,
    /// The payload as text, or base64 when it is not UTF-8.
    pub raw: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub raw_base64: bool,
}

impl DeadLetterEntry {
    pub fn new(recv_ts: EpochMs, market: String, feed: &str, reason: String, raw: &[u8]) -> Self {
        let (raw, raw_base64) = match std::str::from_utf8(raw) {
            Ok(s) => (s.to_owned(), false),
            Err(_) => (B64.encode(raw), true),
        };
        DeadLetterEntry { recv_ts, market, feed: feed.to_owned(), reason, raw, raw_base64 }
    }

    pub fn raw_bytes(&self) -> Vec<u8> {
        if self.raw_base64 {
            B64.decode(&self.raw).unwrap_or_default()
        } else {
            self.raw.clone().into_bytes()
        }
    }
}

/// Append-only JSON-lines file of payloads no venue rule explains.
pub struct DeadLetter {
    path: PathBuf,
    out: BufWriter<File>,
    count: u64,
}

impl DeadLetter {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| IngestError::io(&path, e))?;
        Ok(DeadLetter { path, out: BufWriter::new(file), count: 0 })
    }

    pub fn push(&mut self, entry: &DeadLetterEntry) -> Result<(), IngestError> {
        let line = serde_json::to_string(entry).expect("entry serializes");
        writeln!(self.out, "{line}").map_err(|e| IngestError::io(&self.path, e))?;
        // quarantined payloads are rare; keep them durable
        self.out.flush().map_err(|e| IngestError::io(&self.path, e))?;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Vec<DeadLetterEntry>, IngestError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        text.lines()
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| IngestError::Config(format!("{}:{}: {e}", path.display(), i + 1)))
            })
            .collect()
    }
}
