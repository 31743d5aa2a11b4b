//! Append-only verdict journal, one JSON record per line.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use flowstate::automaton::StateId;
use flowstate::scorer::GroupVerdict;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    /// RFC 3339, UTC.
    pub timestamp: String,
    pub group: StateId,
    pub verdict: GroupVerdict,
    pub actor: String,
}

#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    /// Opens (creating if needed) the journal and returns the entries already
    /// in it, oldest first.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<JournalEntry>)> {
        let path = path.as_ref().to_path_buf();
        let mut entries = Vec::new();
        if path.exists() {
            let f = File::open(&path).with_context(|| format!("opening journal {}", path.display()))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.with_context(|| format!("reading journal {}", path.display()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry = serde_json::from_str(&line)
                    .with_context(|| format!("journal {} line {}", path.display(), i + 1))?;
                entries.push(entry);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .with_context(|| format!("opening journal {}", path.display()))?;
        Ok((Self { path, file }, entries))
    }

    pub fn append(&mut self, entry: &JournalEntry) -> Result<()> {
        let mut line = serde_json::to_string(entry)?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .with_context(|| format!("appending to journal {}", self.path.display()))
    }
}

/// The verdict currently in force for each group: the latest entry wins.
pub fn replay(entries: &[JournalEntry]) -> BTreeMap<StateId, GroupVerdict> {
    entries.iter().map(|e| (e.group, e.verdict)).collect()
}
