//! One JSON object per check, appended to `diagnostics.jsonl`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub suite: String,
    pub check: String,
    /// Measured quantities, keyed by name.
    pub values: Value,
    pub threshold: Option<f64>,
    pub pass: bool,
    pub wall_seconds: f64,
}

impl DiagnosticsRecord {
    /// The record without its wall time, for run-to-run comparisons.
    pub fn timeless(&self) -> DiagnosticsRecord {
        DiagnosticsRecord {
            wall_seconds: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Default)]
pub struct Diagnostics {
    pub records: Vec<DiagnosticsRecord>,
    writer: Option<BufWriter<File>>,
}

impl Diagnostics {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn to_file(path: &Path) -> Result<Self> {
        Ok(Self {
            records: Vec::new(),
            writer: Some(BufWriter::new(File::create(path)?)),
        })
    }

    pub fn push(&mut self, rec: DiagnosticsRecord) -> Result<()> {
        if let Some(w) = self.writer.as_mut() {
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.pass).count()
    }
}

pub fn read_jsonl(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
