//! The assembled annotation service: tag store, job manager and
//! subscriptions over one shared journal.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::TagId;
use crate::ingest::{self, BackoffPolicy, IngestError, ReplayReport, ReplaySpec, SubscriptionManager};
use crate::jobs::{DispatchOutcome, JobError, JobManager, Observation};
use crate::journal::{Journal, JournalError};
use crate::tagstore::{Annotation, TagStore};
use crate::time;

pub const MODELS_DIR: &str = "models";

#[derive(Debug, Error)]
pub enum OpenError {
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error("restoring jobs: {0}")]
    Jobs(#[from] JobError),
}

#[derive(Debug, Default)]
struct Counters {
    observations_ingested: AtomicU64,
    observations_skipped: AtomicU64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobMetrics {
    pub processed: u64,
    pub annotated: u64,
    pub skipped: u64,
    pub errors: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub observations_ingested: u64,
    pub observations_skipped: u64,
    pub annotations_written: u64,
    pub jobs: BTreeMap<String, JobMetrics>,
}

/// Accepted/skipped counts for one ingestion request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOutcome {
    pub accepted: usize,
    pub skipped: usize,
}

pub struct Service {
    pub store: Arc<TagStore>,
    pub jobs: Arc<JobManager>,
    pub subscriptions: Arc<SubscriptionManager>,
    journal: Arc<Journal>,
    counters: Counters,
    data_dir: Option<PathBuf>,
}

impl Service {
    /// Purely in-memory service; nothing is persisted.
    pub fn in_memory() -> Self {
        Self::assemble(Arc::new(Journal::in_memory()), None, BackoffPolicy::default())
    }

    /// Opens the service over `data_dir`, replaying its journal.
    pub fn open(data_dir: &Path) -> Result<Self, OpenError> {
        Self::open_with(data_dir, BackoffPolicy::default())
    }

    pub fn open_with(data_dir: &Path, policy: BackoffPolicy) -> Result<Self, OpenError> {
        let (journal, records) = Journal::open(data_dir)?;
        let svc = Self::assemble(Arc::new(journal), Some(data_dir.to_owned()), policy);
        for r in &records {
            svc.store.apply(r);
            svc.jobs.apply(r);
            svc.subscriptions.apply(r);
        }
        svc.jobs.finish_restore()?;
        tracing::info!(records = records.len(), dir = %data_dir.display(), "journal replayed");
        Ok(svc)
    }

    fn assemble(journal: Arc<Journal>, data_dir: Option<PathBuf>, policy: BackoffPolicy) -> Self {
        let store = Arc::new(TagStore::with_journal(journal.clone()));
        let jobs = Arc::new(JobManager::new(
            store.clone(),
            journal.clone(),
            data_dir.as_ref().map(|d| d.join(MODELS_DIR)),
        ));
        let subscriptions = Arc::new(SubscriptionManager::new(
            journal.clone(),
            "http://127.0.0.1:8080/v1/notify".into(),
            policy,
        ));
        Service {
            store,
            jobs,
            subscriptions,
            journal,
            counters: Counters::default(),
            data_dir,
        }
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub fn is_healthy(&self) -> bool {
        self.journal.is_healthy()
    }

    /// Dispatches parsed observations to the running jobs.
    pub fn dispatch(&self, observations: &[Observation]) -> DispatchOutcome {
        let out = self.jobs.dispatch(observations);
        self.counters
            .observations_ingested
            .fetch_add(out.accepted as u64, Ordering::Relaxed);
        self.counters
            .observations_skipped
            .fetch_add(out.skipped as u64, Ordering::Relaxed);
        out
    }

    /// Parses and dispatches a notification or direct-submission body.
    /// Nothing is dispatched unless the whole body parses.
    pub fn ingest(&self, body: &[u8]) -> Result<IngestOutcome, IngestError> {
        let observations = ingest::parse_notification(body, time::now())?;
        let out = self.dispatch(&observations);
        Ok(IngestOutcome {
            accepted: out.accepted,
            skipped: out.skipped,
        })
    }

    /// Replays an archive in-process.
    pub fn replay(&self, spec: &ReplaySpec) -> Result<ReplayReport, IngestError> {
        ingest::replay(spec, |batch| Ok(self.count_by_tag(&self.dispatch(batch).annotations)))
    }

    fn count_by_tag(&self, annotations: &[Annotation]) -> BTreeMap<String, u64> {
        let mut by_id: BTreeMap<&TagId, u64> = BTreeMap::new();
        for a in annotations {
            *by_id.entry(&a.tag_id).or_default() += 1;
        }
        by_id
            .into_iter()
            .map(|(id, n)| (self.store.tag(id).map_or_else(|| id.to_string(), |t| t.name), n))
            .collect()
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            observations_ingested: self.counters.observations_ingested.load(Ordering::Relaxed),
            observations_skipped: self.counters.observations_skipped.load(Ordering::Relaxed),
            annotations_written: self.store.annotation_count() as u64,
            jobs: self
                .jobs
                .list()
                .into_iter()
                .map(|j| {
                    (
                        j.id.to_string(),
                        JobMetrics {
                            processed: j.processed_count,
                            annotated: j.annotated_count,
                            skipped: j.skipped_count,
                            errors: j.error_count,
                        },
                    )
                })
                .collect(),
        }
    }
}
