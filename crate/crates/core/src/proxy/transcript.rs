//! Append-only persistence of every LLM request/response pair.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

pub const TRANSCRIPT_SCHEMA_VERSION: u32 = 1;

/// One persisted exchange. A query that needed retries produces one entry
/// per attempt.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub version: u32,
    pub student: usize,
    pub query_index: usize,
    pub attempt: usize,
    pub prompt: String,
    pub response: String,
    pub latency_ms: Option<u64>,
    pub prompt_tokens: Option<u32>,
    pub completion_tokens: Option<u32>,
}

enum Sink {
    File(BufWriter<File>),
    Memory(Vec<TranscriptEntry>),
    Null,
}

/// Serialized append-only store; entries are flushed before the answer that
/// produced them is returned, so no transcript is ever lost to a crash
/// later in the pipeline.
pub struct TranscriptStore {
    sink: Mutex<Sink>,
}

impl TranscriptStore {
    pub fn to_path<P: AsRef<Path>>(path: P) -> io::Result<Self> {
        if let Some(parent) = path.as_ref().parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(TranscriptStore {
            sink: Mutex::new(Sink::File(BufWriter::new(File::create(path)?))),
        })
    }

    pub fn in_memory() -> Self {
        TranscriptStore {
            sink: Mutex::new(Sink::Memory(Vec::new())),
        }
    }

    /// Discards entries; for simulated runs with no LLM traffic.
    pub fn disabled() -> Self {
        TranscriptStore {
            sink: Mutex::new(Sink::Null),
        }
    }

    pub fn append(&self, entry: TranscriptEntry) -> io::Result<()> {
        let mut sink = self.sink.lock().unwrap();
        match &mut *sink {
            Sink::File(w) => {
                serde_json::to_writer(&mut *w, &entry)?;
                w.write_all(b"\n")?;
                w.flush()
            }
            Sink::Memory(v) => {
                v.push(entry);
                Ok(())
            }
            Sink::Null => Ok(()),
        }
    }

    /// Recorded entries, when the store is in-memory.
    pub fn entries(&self) -> Vec<TranscriptEntry> {
        match &*self.sink.lock().unwrap() {
            Sink::Memory(v) => v.clone(),
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(attempt: usize) -> TranscriptEntry {
        TranscriptEntry {
            version: TRANSCRIPT_SCHEMA_VERSION,
            student: 3,
            query_index: 14,
            attempt,
            prompt: "p".into(),
            response: "r".into(),
            latency_ms: Some(5),
            prompt_tokens: Some(100),
            completion_tokens: Some(50),
        }
    }

    #[test]
    fn file_store_appends_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let store = TranscriptStore::to_path(&path).unwrap();
        store.append(entry(0)).unwrap();
        store.append(entry(1)).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = content.lines().collect();
        assert_eq!(lines.len(), 2);
        let parsed: TranscriptEntry = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(parsed.attempt, 1);
        assert_eq!(parsed.version, TRANSCRIPT_SCHEMA_VERSION);
    }

    #[test]
    fn memory_store_collects() {
        let store = TranscriptStore::in_memory();
        store.append(entry(0)).unwrap();
        assert_eq!(store.entries().len(), 1);
    }
}
