use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::glob::glob_match;
use crate::geo::GeoPoint;
use crate::ids::{DomainId, JobId, TagId};
use crate::time::{self, Timestamp};

/// Default LOF score above which a reading is anomalous.
pub const DEFAULT_LOF_THRESHOLD: f64 = 1.5;

/// Selection predicate over incoming observations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryContext {
    #[serde(default)]
    pub entity_type: Option<String>,
    pub id_pattern: String,
    pub attribute: String,
}

impl QueryContext {
    pub fn matches(&self, obs: &Observation) -> bool {
        self.entity_type
            .as_ref()
            .is_none_or(|t| obs.entity_type.as_deref() == Some(t.as_str()))
            && obs.attribute == self.attribute
            && glob_match(&self.id_pattern, &obs.entity_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Anomaly,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Created,
    Trained,
    Running,
    Stopped,
}

impl std::fmt::Display for JobState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            JobState::Created => "created",
            JobState::Trained => "trained",
            JobState::Running => "running",
            JobState::Stopped => "stopped",
        };
        f.write_str(s)
    }
}

fn default_threshold() -> f64 {
    DEFAULT_LOF_THRESHOLD
}

fn default_epochs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DetectorConfig {
    Lof {
        k: usize,
        #[serde(default)]
        capacity: Option<usize>,
        #[serde(default = "default_threshold")]
        threshold: f64,
        /// Append readings scored as normal to the reference set.
        #[serde(default)]
        feedback: bool,
        #[serde(default)]
        normalize: bool,
    },
    /// Either explicit `low`/`high` bounds or `q_low`/`q_high` quantiles
    /// fitted from training data.
    Range {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        low: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        high: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q_low: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q_high: Option<f64>,
    },
    /// Multiclass perceptron over the classes of the tag mapping.
    Perceptron {
        #[serde(default = "default_epochs")]
        epochs: usize,
        /// Preset weights, one `[w, bias]` row per class in class-name order.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<Vec<f64>>>,
    },
}

/// How scores and classes become tags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TagMapping {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_tag_id: Option<TagId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anomalous_tag_id: Option<TagId>,
    #[serde(default)]
    pub emit_normal: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub class_to_tag: BTreeMap<String, TagId>,
}

impl TagMapping {
    pub(crate) fn referenced_tags(&self) -> impl Iterator<Item = &TagId> {
        self.normal_tag_id
            .iter()
            .chain(self.anomalous_tag_id.iter())
            .chain(self.class_to_tag.values())
    }
}

/// Client-supplied part of a job: the create and update payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub name: String,
    pub kind: JobKind,
    pub query: QueryContext,
    pub tag_domain_id: DomainId,
    #[serde(default)]
    pub mapping: TagMapping,
    pub detector: DetectorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationJob {
    pub id: JobId,
    #[serde(flatten)]
    pub spec: JobSpec,
    pub state: JobState,
    pub trained_count: u64,
    pub processed_count: u64,
    pub annotated_count: u64,
    pub skipped_count: u64,
    pub error_count: u64,
}

/// Counter update journaled after each dispatched batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobProgress {
    pub id: JobId,
    pub processed_count: u64,
    pub annotated_count: u64,
    pub skipped_count: u64,
    pub error_count: u64,
}

/// One sensor reading. `value` is `None` for non-numeric readings, which
/// are counted but never scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub entity_id: String,
    #[serde(default)]
    pub entity_type: Option<String>,
    pub attribute: String,
    pub value: Option<f64>,
    #[serde(with = "time::rfc3339")]
    pub timestamp: Timestamp,
    #[serde(default)]
    pub location: Option<GeoPoint>,
}

impl Observation {
    pub fn numeric(entity_id: &str, entity_type: Option<&str>, attribute: &str, value: f64, timestamp: Timestamp) -> Self {
        Observation {
            entity_id: entity_id.to_owned(),
            entity_type: entity_type.map(str::to_owned),
            attribute: attribute.to_owned(),
            value: Some(value),
            timestamp,
            location: None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        self.value.is_some()
    }
}

/// One labelled or unlabelled training reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub value: f64,
    #[serde(default, with = "time::rfc3339_opt", skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl TrainingSample {
    pub fn unlabelled(value: f64) -> Self {
        TrainingSample {
            value,
            timestamp: None,
            label: None,
        }
    }

    pub fn labelled(value: f64, label: &str) -> Self {
        TrainingSample {
            value,
            timestamp: None,
            label: Some(label.to_owned()),
        }
    }
}
