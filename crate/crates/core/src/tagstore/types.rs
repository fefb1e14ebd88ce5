use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::geo::GeoPoint;
use crate::ids::{AnnotationId, DomainId, JobId, TagId};
use crate::time::{self, Timestamp};

/// A named collection of tags, e.g. `high` / `normal` / `low`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagDomain {
    pub id: DomainId,
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Tags in creation order.
    pub tag_ids: Vec<TagId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tag {
    pub id: TagId,
    pub name: String,
    pub domain_id: DomainId,
    #[serde(default)]
    pub related_tag_ids: BTreeSet<TagId>,
}

/// Who produced an annotation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Annotator {
    Job(JobId),
    User(String),
}

/// A tag applied to one attribute of one entity over a closed time
/// interval, optionally at a location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: AnnotationId,
    pub entity_id: String,
    pub attribute: String,
    pub tag_id: TagId,
    #[serde(with = "time::rfc3339")]
    pub time_from: Timestamp,
    #[serde(with = "time::rfc3339")]
    pub time_to: Timestamp,
    pub location: Option<GeoPoint>,
    pub numeric_value: Option<f64>,
    pub text_value: Option<String>,
    pub confidence: Option<f64>,
    pub annotator: Annotator,
}

/// An annotation before the store assigns its id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewAnnotation {
    pub entity_id: String,
    pub attribute: String,
    pub tag_id: TagId,
    #[serde(with = "time::rfc3339")]
    pub time_from: Timestamp,
    #[serde(with = "time::rfc3339")]
    pub time_to: Timestamp,
    #[serde(default)]
    pub location: Option<GeoPoint>,
    #[serde(default)]
    pub numeric_value: Option<f64>,
    #[serde(default)]
    pub text_value: Option<String>,
    #[serde(default)]
    pub confidence: Option<f64>,
    pub annotator: Annotator,
}

impl NewAnnotation {
    /// A point annotation at `at`.
    pub fn point(entity_id: &str, attribute: &str, tag_id: TagId, at: Timestamp, annotator: Annotator) -> Self {
        NewAnnotation {
            entity_id: entity_id.to_owned(),
            attribute: attribute.to_owned(),
            tag_id,
            time_from: at,
            time_to: at,
            location: None,
            numeric_value: None,
            text_value: None,
            confidence: None,
            annotator,
        }
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if self.time_from > self.time_to {
            return Err(StoreError::InvalidInterval);
        }
        if self.location.is_some_and(|p| !p.is_valid()) {
            return Err(StoreError::InvalidCoordinates);
        }
        if self
            .confidence
            .is_some_and(|c| !(c.is_finite() && (0.0..=1.0).contains(&c)))
        {
            return Err(StoreError::InvalidConfidence);
        }
        Ok(())
    }

    pub(crate) fn into_annotation(self, id: AnnotationId) -> Annotation {
        Annotation {
            id,
            entity_id: self.entity_id,
            attribute: self.attribute,
            tag_id: self.tag_id,
            time_from: time::truncate_millis(self.time_from),
            time_to: time::truncate_millis(self.time_to),
            location: self.location,
            numeric_value: self.numeric_value,
            text_value: self.text_value,
            confidence: self.confidence,
            annotator: self.annotator,
        }
    }
}
