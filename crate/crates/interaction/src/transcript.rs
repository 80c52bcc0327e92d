//! Newline-delimited JSON log of every stage input and output.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::orchestrator::Phase;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub turn: u64,
    pub stage: Phase,
    pub input: String,
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn push(&mut self, turn: u64, stage: Phase, input: impl Into<String>, output: impl Into<String>) {
        self.records.push(TranscriptRecord {
            turn,
            stage,
            input: input.into(),
            output: output.into(),
            error: None,
        });
    }

    pub fn push_error(&mut self, turn: u64, stage: Phase, input: impl Into<String>, error: impl Into<String>) {
        self.records.push(TranscriptRecord {
            turn,
            stage,
            input: input.into(),
            output: String::new(),
            error: Some(error.into()),
        });
    }

    pub fn errors(&self) -> impl Iterator<Item = &TranscriptRecord> {
        self.records.iter().filter(|r| r.error.is_some())
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("transcript records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> serde_json::Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<serde_json::Result<Vec<_>>>()?;
        Ok(Self { records })
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_ndjson().as_bytes())
    }
}
