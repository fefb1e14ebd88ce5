//! Annotation-job lifecycle and observation routing.
//!
//! Each job owns a dedicated model and moves through
//! `created -> trained -> running <-> stopped`. Incoming observations are
//! matched against every running job's query context; matching jobs score
//! the reading and write the resulting annotations to the tag store.
//!
//! Every job sits behind its own mutex, so a job processes its share of a
//! batch strictly in arrival order while different jobs run independently
//! (and, with the `parallel` feature, concurrently).

mod glob;
mod types;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use thiserror::Error;

use crate::exec::Exec;
use crate::ids::{JobId, TagId};
use crate::journal::{Journal, JournalError, Mutation};
use crate::mlengine::{
    AnomalyDetector, ClassifierModel, FeatureVector, LofModel, MlError, Model, RangeDetector, RangeSpec,
};
use crate::tagstore::{Annotation, Annotator, NewAnnotation, StoreError, TagStore};

pub use glob::glob_match;
pub use types::{
    AnnotationJob, DetectorConfig, JobKind, JobProgress, JobSpec, JobState, Observation, QueryContext, TagMapping,
    TrainingSample, DEFAULT_LOF_THRESHOLD,
};

/// Processed observations between periodic model snapshots.
pub const SNAPSHOT_EVERY: u64 = 1000;

#[derive(Debug, Error)]
pub enum JobError {
    #[error("unknown job {0}")]
    UnknownJob(JobId),
    #[error("unknown tag domain {0}")]
    UnknownDomain(crate::ids::DomainId),
    #[error("unknown tag {0}")]
    UnknownTag(TagId),
    #[error("invalid job configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot {op} a job in state {state}")]
    WrongState { op: &'static str, state: JobState },
    #[error("classification training samples must all carry a label")]
    MissingLabels,
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Storage(#[from] JournalError),
    #[error("model snapshot: {0}")]
    Snapshot(#[from] std::io::Error),
}

impl From<StoreError> for JobError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownTag(t) => JobError::UnknownTag(t),
            StoreError::UnknownDomain(d) => JobError::UnknownDomain(d),
            StoreError::Storage(j) => JobError::Storage(j),
            other => JobError::InvalidConfig(other.to_string()),
        }
    }
}

struct JobSlot {
    job: AnnotationJob,
    model: Model,
    deleted: bool,
}

/// Result of routing a batch of observations.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct DispatchOutcome {
    pub accepted: usize,
    pub skipped: usize,
    /// Annotations in observation order, then job id.
    pub annotations: Vec<Annotation>,
}

pub struct JobManager {
    jobs: RwLock<BTreeMap<JobId, Arc<Mutex<JobSlot>>>>,
    store: Arc<TagStore>,
    journal: Arc<Journal>,
    snapshot_dir: Option<PathBuf>,
    exec: Exec,
}

fn model_for(spec: &JobSpec) -> Result<Model, JobError> {
    let invalid = |m: &str| JobError::InvalidConfig(m.to_owned());
    match (&spec.kind, &spec.detector) {
        (
            JobKind::Anomaly,
            DetectorConfig::Lof {
                k,
                capacity,
                threshold,
                normalize,
                ..
            },
        ) => {
            if !(threshold.is_finite() && *threshold > 0.0) {
                return Err(invalid("lof threshold must be positive"));
            }
            let m = LofModel::new(*k, 1, *capacity).map_err(|e| JobError::InvalidConfig(e.to_string()))?;
            Ok(Model::Lof(m.with_normalization(*normalize)))
        }
        (
            JobKind::Anomaly,
            DetectorConfig::Range {
                low,
                high,
                q_low,
                q_high,
            },
        ) => {
            let spec = match (low, high, q_low, q_high) {
                (Some(low), Some(high), None, None) => RangeSpec::Explicit { low: *low, high: *high },
                (None, None, Some(q_low), Some(q_high)) => RangeSpec::Quantile {
                    q_low: *q_low,
                    q_high: *q_high,
                },
                _ => return Err(invalid("range detector needs either low/high or q_low/q_high")),
            };
            Ok(Model::Range(
                RangeDetector::new(spec).map_err(|e| JobError::InvalidConfig(e.to_string()))?,
            ))
        }
        (JobKind::Classification, DetectorConfig::Perceptron { epochs, weights }) => {
            if *epochs == 0 {
                return Err(invalid("epochs must be at least 1"));
            }
            let classes: Vec<String> = spec.mapping.class_to_tag.keys().cloned().collect();
            if classes.is_empty() {
                return Err(invalid("classification jobs need a non-empty class_to_tag mapping"));
            }
            let m = match weights {
                Some(w) => ClassifierModel::with_weights(classes, w.clone()),
                None => ClassifierModel::new(classes, 1),
            }
            .map_err(|e| JobError::InvalidConfig(e.to_string()))?;
            if m.dimension() != 1 {
                return Err(invalid("observations are scalar; weights rows must be [w, bias]"));
            }
            Ok(Model::Perceptron(m))
        }
        (JobKind::Anomaly, _) => Err(invalid("anomaly jobs use a lof or range detector")),
        (JobKind::Classification, _) => Err(invalid("classification jobs use a perceptron detector")),
    }
}

/// Training points required before the job may run.
fn min_training(spec: &JobSpec, model: &Model) -> u64 {
    match model {
        Model::Lof(m) => m.min_training() as u64,
        Model::Range(r) => r.min_training() as u64,
        Model::Perceptron(_) => match &spec.detector {
            DetectorConfig::Perceptron { weights: Some(_), .. } => 0,
            _ => 1,
        },
    }
}

impl JobManager {
    pub fn new(store: Arc<TagStore>, journal: Arc<Journal>, snapshot_dir: Option<PathBuf>) -> Self {
        JobManager {
            jobs: RwLock::new(BTreeMap::new()),
            store,
            journal,
            snapshot_dir,
            exec: Exec::default(),
        }
    }

    pub fn in_memory(store: Arc<TagStore>) -> Self {
        Self::new(store, Arc::new(Journal::in_memory()), None)
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    fn slot(&self, id: &JobId) -> Result<Arc<Mutex<JobSlot>>, JobError> {
        self.jobs
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| JobError::UnknownJob(id.clone()))
    }

    fn validate(&self, spec: &JobSpec) -> Result<Model, JobError> {
        if spec.name.trim().is_empty() {
            return Err(JobError::InvalidConfig("name must not be empty".into()));
        }
        if spec.query.attribute.is_empty() || spec.query.id_pattern.is_empty() {
            return Err(JobError::InvalidConfig("query needs an attribute and an id pattern".into()));
        }
        if self.store.domain(&spec.tag_domain_id).is_none() {
            return Err(JobError::UnknownDomain(spec.tag_domain_id.clone()));
        }
        match spec.kind {
            JobKind::Anomaly if spec.mapping.anomalous_tag_id.is_none() => {
                return Err(JobError::InvalidConfig("anomaly jobs need anomalous_tag_id".into()))
            }
            JobKind::Anomaly if spec.mapping.emit_normal && spec.mapping.normal_tag_id.is_none() => {
                return Err(JobError::InvalidConfig("emit_normal requires normal_tag_id".into()))
            }
            _ => {}
        }
        for t in spec.mapping.referenced_tags() {
            if !self.store.tag_in_domain(t, &spec.tag_domain_id) {
                return Err(JobError::UnknownTag(t.clone()));
            }
        }
        model_for(spec)
    }

    fn snapshot_path(&self, id: &JobId) -> Option<PathBuf> {
        self.snapshot_dir.as_ref().map(|d| d.join(format!("{id}.json")))
    }

    fn write_snapshot(&self, slot: &JobSlot) -> Result<(), JobError> {
        let Some(path) = self.snapshot_path(&slot.job.id) else {
            return Ok(());
        };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, slot.model.to_json())?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Snapshot the model, then journal the job record.
    fn persist(&self, slot: &JobSlot) -> Result<(), JobError> {
        self.write_snapshot(slot)?;
        self.journal.append(&Mutation::PutJob(slot.job.clone()))?;
        Ok(())
    }

    pub fn create_job(&self, spec: JobSpec) -> Result<AnnotationJob, JobError> {
        let model = self.validate(&spec)?;
        let job = AnnotationJob {
            id: JobId::generate(),
            spec,
            state: JobState::Created,
            trained_count: 0,
            processed_count: 0,
            annotated_count: 0,
            skipped_count: 0,
            error_count: 0,
        };
        let slot = JobSlot {
            job: job.clone(),
            model,
            deleted: false,
        };
        self.persist(&slot)?;
        self.jobs.write().insert(job.id.clone(), Arc::new(Mutex::new(slot)));
        Ok(job)
    }

    pub fn get(&self, id: &JobId) -> Result<AnnotationJob, JobError> {
        Ok(self.slot(id)?.lock().job.clone())
    }

    /// All jobs ordered by id.
    pub fn list(&self) -> Vec<AnnotationJob> {
        let slots: Vec<_> = self.jobs.read().values().cloned().collect();
        slots.iter().map(|s| s.lock().job.clone()).collect()
    }

    pub fn model(&self, id: &JobId) -> Result<Model, JobError> {
        Ok(self.slot(id)?.lock().model.clone())
    }

    /// Replaces the client-supplied part of a non-running job. A changed
    /// detector, kind or class set discards the model and resets the job to
    /// `created`.
    pub fn update_job(&self, id: &JobId, spec: JobSpec) -> Result<AnnotationJob, JobError> {
        let slot = self.slot(id)?;
        let mut s = slot.lock();
        if s.job.state == JobState::Running {
            return Err(JobError::WrongState {
                op: "update",
                state: s.job.state,
            });
        }
        let model = self.validate(&spec)?;
        let retrain = s.job.spec.detector != spec.detector
            || s.job.spec.kind != spec.kind
            || s.job.spec.mapping.class_to_tag.keys().ne(spec.mapping.class_to_tag.keys());
        let mut next = s.job.clone();
        next.spec = spec;
        let next_model = if retrain {
            next.state = JobState::Created;
            next.trained_count = 0;
            model
        } else {
            s.model.clone()
        };
        let candidate = JobSlot {
            job: next,
            model: next_model,
            deleted: false,
        };
        self.persist(&candidate)?;
        *s = candidate;
        Ok(s.job.clone())
    }

    /// Stops and removes the job. Its annotations stay in the store.
    pub fn delete_job(&self, id: &JobId) -> Result<AnnotationJob, JobError> {
        let slot = self.slot(id)?;
        let mut s = slot.lock();
        self.journal.append(&Mutation::DeleteJob { id: id.clone() })?;
        s.deleted = true;
        s.job.state = JobState::Stopped;
        self.jobs.write().remove(id);
        if let Some(p) = self.snapshot_path(id) {
            let _ = fs::remove_file(p);
        }
        Ok(s.job.clone())
    }

    pub fn submit_training(&self, id: &JobId, samples: &[TrainingSample]) -> Result<AnnotationJob, JobError> {
        let slot = self.slot(id)?;
        let mut s = slot.lock();
        if s.job.state == JobState::Running {
            return Err(JobError::WrongState {
                op: "train",
                state: s.job.state,
            });
        }
        let features = samples
            .iter()
            .map(|x| FeatureVector::scalar(x.value))
            .collect::<Result<Vec<_>, _>>()?;
        let mut model = s.model.clone();
        match &mut model {
            Model::Lof(m) => m.train(&features)?,
            Model::Range(r) => r.train(&features)?,
            Model::Perceptron(m) => {
                let labelled = samples
                    .iter()
                    .zip(features)
                    .map(|(x, f)| x.label.clone().map(|l| (f, l)).ok_or(JobError::MissingLabels))
                    .collect::<Result<Vec<_>, _>>()?;
                let epochs = match &s.job.spec.detector {
                    DetectorConfig::Perceptron { epochs, .. } => *epochs,
                    _ => 1,
                };
                m.classifier_train(&labelled, epochs)?;
            }
        }
        let mut job = s.job.clone();
        job.trained_count += samples.len() as u64;
        if job.state == JobState::Created && job.trained_count >= min_training(&job.spec, &model) {
            job.state = JobState::Trained;
        }
        let next = JobSlot {
            job,
            model,
            deleted: false,
        };
        self.persist(&next)?;
        *s = next;
        Ok(s.job.clone())
    }

    pub fn start_job(&self, id: &JobId) -> Result<AnnotationJob, JobError> {
        self.transition(id, "start", &[JobState::Trained, JobState::Stopped], JobState::Running)
    }

    pub fn stop_job(&self, id: &JobId) -> Result<AnnotationJob, JobError> {
        self.transition(id, "stop", &[JobState::Running], JobState::Stopped)
    }

    fn transition(
        &self,
        id: &JobId,
        op: &'static str,
        from: &[JobState],
        to: JobState,
    ) -> Result<AnnotationJob, JobError> {
        let slot = self.slot(id)?;
        let mut s = slot.lock();
        if !from.contains(&s.job.state) {
            return Err(JobError::WrongState { op, state: s.job.state });
        }
        let mut job = s.job.clone();
        job.state = to;
        self.persist(&JobSlot {
            job: job.clone(),
            model: s.model.clone(),
            deleted: false,
        })?;
        s.job = job;
        Ok(s.job.clone())
    }

    /// Running jobs whose query context selects `obs`, by job id.
    pub fn match_jobs(&self, obs: &Observation) -> Vec<AnnotationJob> {
        self.running_slots()
            .into_iter()
            .filter_map(|s| {
                let s = s.lock();
                (s.job.state == JobState::Running && s.job.spec.query.matches(obs)).then(|| s.job.clone())
            })
            .collect()
    }

    fn running_slots(&self) -> Vec<Arc<Mutex<JobSlot>>> {
        self.jobs
            .read()
            .values()
            .filter(|s| s.lock().job.state == JobState::Running)
            .cloned()
            .collect()
    }

    pub fn handle_observation(&self, obs: &Observation) -> Vec<Annotation> {
        self.dispatch(std::slice::from_ref(obs)).annotations
    }

    /// Routes a batch to every running job. Each job sees its matching
    /// observations in batch order.
    pub fn dispatch(&self, batch: &[Observation]) -> DispatchOutcome {
        let accepted = batch.iter().filter(|o| o.is_numeric()).count();
        let mut outcome = DispatchOutcome {
            accepted,
            skipped: batch.len() - accepted,
            annotations: Vec::new(),
        };
        let slots = self.running_slots();
        if slots.is_empty() || batch.is_empty() {
            return outcome;
        }
        let per_job = self.exec.map(&slots, |slot| self.run_job(slot, batch));
        let mut tagged: Vec<(usize, usize, Annotation)> = per_job
            .into_iter()
            .enumerate()
            .flat_map(|(j, anns)| anns.into_iter().map(move |(i, a)| (i, j, a)))
            .collect();
        tagged.sort_by_key(|(i, j, _)| (*i, *j));
        outcome.annotations = tagged.into_iter().map(|(_, _, a)| a).collect();
        outcome
    }

    fn run_job(&self, slot: &Arc<Mutex<JobSlot>>, batch: &[Observation]) -> Vec<(usize, Annotation)> {
        let mut s = slot.lock();
        let mut out = Vec::new();
        let mut touched = false;
        for (i, obs) in batch.iter().enumerate() {
            if s.deleted || s.job.state != JobState::Running || !s.job.spec.query.matches(obs) {
                continue;
            }
            touched = true;
            let Some(value) = obs.value else {
                s.job.skipped_count += 1;
                continue;
            };
            s.job.processed_count += 1;
            match self.evaluate(&mut s, obs, value) {
                Ok(Some(a)) => {
                    s.job.annotated_count += 1;
                    out.push((i, a));
                }
                Ok(None) => {}
                Err(e) => {
                    tracing::debug!(job = %s.job.id, error = %e, "observation not scored");
                    s.job.error_count += 1;
                }
            }
            if s.job.processed_count.is_multiple_of(SNAPSHOT_EVERY) {
                if let Err(e) = self.persist(&s) {
                    tracing::warn!(job = %s.job.id, error = %e, "periodic snapshot failed");
                }
            }
        }
        if touched {
            let p = JobProgress {
                id: s.job.id.clone(),
                processed_count: s.job.processed_count,
                annotated_count: s.job.annotated_count,
                skipped_count: s.job.skipped_count,
                error_count: s.job.error_count,
            };
            if let Err(e) = self.journal.append(&Mutation::JobProgress(p)) {
                tracing::warn!(job = %s.job.id, error = %e, "progress not journaled");
            }
        }
        out
    }

    /// Scores one reading for a running job and records the annotation it
    /// produces, if any.
    fn evaluate(&self, s: &mut JobSlot, obs: &Observation, value: f64) -> Result<Option<Annotation>, JobError> {
        let x = FeatureVector::scalar(value)?;
        let mapping = &s.job.spec.mapping;
        let (tag, confidence) = match &mut s.model {
            Model::Lof(m) => {
                let score = m.lof_score(&x)?;
                let (threshold, feedback) = match &s.job.spec.detector {
                    DetectorConfig::Lof { threshold, feedback, .. } => (*threshold, *feedback),
                    _ => (DEFAULT_LOF_THRESHOLD, false),
                };
                let anomalous = score > threshold;
                if feedback && !anomalous {
                    m.lof_train(std::slice::from_ref(&x))?;
                }
                (anomaly_tag(mapping, anomalous), (score / (2.0 * threshold)).min(1.0))
            }
            Model::Range(r) => {
                let score = r.score(&x)?;
                let anomalous = score > 0.0;
                (anomaly_tag(mapping, anomalous), if anomalous { 1.0 } else { 0.0 })
            }
            Model::Perceptron(m) => {
                let (class, margin) = m.classifier_predict(&x)?;
                (mapping.class_to_tag.get(&class).cloned(), 1.0 - (-margin).exp())
            }
        };
        let Some(tag_id) = tag else {
            return Ok(None);
        };
        let mut a = NewAnnotation::point(
            &obs.entity_id,
            &obs.attribute,
            tag_id,
            obs.timestamp,
            Annotator::Job(s.job.id.clone()),
        );
        a.location = obs.location;
        a.numeric_value = Some(value);
        a.confidence = Some(confidence.clamp(0.0, 1.0));
        Ok(Some(self.store.record_annotation(a)?))
    }

    /// Applies a replayed journal record. Models are attached afterwards by
    /// [`JobManager::finish_restore`].
    pub fn apply(&self, m: &Mutation) {
        match m {
            Mutation::PutJob(job) => {
                let model = match model_for(&job.spec) {
                    Ok(m) => m,
                    Err(e) => {
                        tracing::warn!(job = %job.id, error = %e, "skipping journaled job with invalid spec");
                        return;
                    }
                };
                let mut jobs = self.jobs.write();
                match jobs.get(&job.id) {
                    Some(slot) => slot.lock().job = job.clone(),
                    None => {
                        jobs.insert(
                            job.id.clone(),
                            Arc::new(Mutex::new(JobSlot {
                                job: job.clone(),
                                model,
                                deleted: false,
                            })),
                        );
                    }
                }
            }
            Mutation::JobProgress(p) => {
                if let Some(slot) = self.jobs.read().get(&p.id) {
                    let mut s = slot.lock();
                    s.job.processed_count = p.processed_count;
                    s.job.annotated_count = p.annotated_count;
                    s.job.skipped_count = p.skipped_count;
                    s.job.error_count = p.error_count;
                }
            }
            Mutation::DeleteJob { id } => {
                self.jobs.write().remove(id);
            }
            _ => {}
        }
    }

    /// Loads model snapshots for restored jobs and reconciles annotation
    /// counters with the store. Jobs without a snapshot get a fresh model;
    /// if that model cannot score yet, the job falls back to `created`.
    pub fn finish_restore(&self) -> Result<(), JobError> {
        let slots: Vec<_> = self.jobs.read().values().cloned().collect();
        for slot in slots {
            let mut s = slot.lock();
            let snapshot = self.snapshot_path(&s.job.id).filter(|p| p.exists());
            if let Some(path) = snapshot {
                let raw = fs::read_to_string(&path)?;
                s.model = Model::from_json(&raw)
                    .map_err(|e| JobError::InvalidConfig(format!("snapshot {}: {e}", path.display())))?;
            } else {
                s.model = model_for(&s.job.spec)?;
                if s.job.state != JobState::Created && min_training(&s.job.spec, &s.model) > 0 {
                    s.job.state = JobState::Created;
                    s.job.trained_count = 0;
                }
            }
            s.job.annotated_count = self.store.annotations_by_job(&s.job.id);
        }
        Ok(())
    }

    pub fn snapshot_dir(&self) -> Option<&Path> {
        self.snapshot_dir.as_deref()
    }

    /// Per-job counters keyed by job id.
    pub fn counters(&self) -> HashMap<JobId, JobProgress> {
        self.list()
            .into_iter()
            .map(|j| {
                (
                    j.id.clone(),
                    JobProgress {
                        id: j.id,
                        processed_count: j.processed_count,
                        annotated_count: j.annotated_count,
                        skipped_count: j.skipped_count,
                        error_count: j.error_count,
                    },
                )
            })
            .collect()
    }
}

fn anomaly_tag(mapping: &TagMapping, anomalous: bool) -> Option<TagId> {
    if anomalous {
        mapping.anomalous_tag_id.clone()
    } else if mapping.emit_normal {
        mapping.normal_tag_id.clone()
    } else {
        None
    }
}
