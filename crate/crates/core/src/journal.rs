//! Append-only JSON-lines journal.
//!
//! One line per mutation, `{"op": "...", "data": {...}}`, written with a
//! single `write` call and flushed before the mutation becomes visible in
//! memory. On startup the whole file is replayed in order.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{JobId, SubscriptionId, TagId};
use crate::ingest::Subscription;
use crate::jobs::{AnnotationJob, JobProgress};
use crate::tagstore::{Annotation, Tag, TagDomain};

pub const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("journal i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("journal corrupted at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("journal is not writable")]
    Unwritable,
}

/// Every persisted mutation of the service state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "data", rename_all = "snake_case")]
pub enum Mutation {
    PutDomain(TagDomain),
    PutTag(Tag),
    RelateTags { tag_a: TagId, tag_b: TagId },
    PutAnnotation(Annotation),
    PutJob(AnnotationJob),
    JobProgress(JobProgress),
    DeleteJob { id: JobId },
    PutSubscription(Subscription),
    DeleteSubscription { id: SubscriptionId },
}

pub struct Journal {
    path: Option<PathBuf>,
    file: Mutex<Option<File>>,
    failed: AtomicBool,
    injected_failure: AtomicBool,
}

impl std::fmt::Debug for Journal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Journal").field("path", &self.path).finish()
    }
}

impl Journal {
    /// A journal that records nothing. Used for pure in-memory stores.
    pub fn in_memory() -> Self {
        Journal {
            path: None,
            file: Mutex::new(None),
            failed: AtomicBool::new(false),
            injected_failure: AtomicBool::new(false),
        }
    }

    /// Opens (creating if needed) the journal in `dir` and returns the
    /// mutations already recorded there.
    ///
    /// A final line without a terminating newline is a torn write from a
    /// killed process; it is dropped and the file truncated before it. Any
    /// other unparsable line is reported as corruption with its 1-based
    /// line number.
    pub fn open(dir: &Path) -> Result<(Self, Vec<Mutation>), JournalError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(JOURNAL_FILE);
        let mut records = Vec::new();
        let mut good_len: u64 = 0;
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            let mut lines = reader.split(b'\n').peekable();
            let total_len = fs::metadata(&path)?.len();
            let mut offset: u64 = 0;
            let mut line_no = 0;
            while let Some(line) = lines.next() {
                let line = line?;
                line_no += 1;
                let consumed = line.len() as u64 + 1;
                let is_last = lines.peek().is_none();
                let torn = is_last && offset + consumed > total_len;
                if line.iter().all(u8::is_ascii_whitespace) {
                    offset += consumed;
                    if !torn {
                        good_len = offset;
                    }
                    continue;
                }
                match serde_json::from_slice::<Mutation>(&line) {
                    Ok(m) => {
                        records.push(m);
                        offset += consumed;
                        good_len = offset.min(total_len);
                    }
                    Err(_) if torn => break,
                    Err(e) => {
                        return Err(JournalError::Corrupt {
                            line: line_no,
                            reason: e.to_string(),
                        })
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        if file.metadata()?.len() > good_len {
            file.set_len(good_len)?;
        }
        Ok((
            Journal {
                path: Some(path),
                file: Mutex::new(Some(file)),
                failed: AtomicBool::new(false),
                injected_failure: AtomicBool::new(false),
            },
            records,
        ))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn is_persistent(&self) -> bool {
        self.path.is_some()
    }

    pub fn append(&self, m: &Mutation) -> Result<(), JournalError> {
        if self.injected_failure.load(Ordering::SeqCst) {
            self.failed.store(true, Ordering::SeqCst);
            return Err(JournalError::Unwritable);
        }
        let mut guard = self.file.lock();
        let Some(file) = guard.as_mut() else {
            return Ok(());
        };
        let mut line = serde_json::to_vec(m).map_err(std::io::Error::other)?;
        line.push(b'\n');
        let res = file.write_all(&line).and_then(|_| file.flush());
        match res {
            Ok(()) => {
                self.failed.store(false, Ordering::SeqCst);
                Ok(())
            }
            Err(e) => {
                self.failed.store(true, Ordering::SeqCst);
                Err(e.into())
            }
        }
    }

    /// False once a write has failed, until a later write succeeds.
    pub fn is_healthy(&self) -> bool {
        !self.failed.load(Ordering::SeqCst) && !self.injected_failure.load(Ordering::SeqCst)
    }

    /// Makes every subsequent append fail. Operational testing hook.
    pub fn inject_failure(&self, on: bool) {
        self.injected_failure.store(on, Ordering::SeqCst);
        if !on {
            self.failed.store(false, Ordering::SeqCst);
        }
    }
}
