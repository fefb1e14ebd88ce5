use serde::{Deserialize, Serialize};

use super::{Annotation, StoreError};
use crate::geo::BBox;
use crate::ids::{DomainId, TagId};
use crate::time::Timestamp;

/// Closed time window; a missing bound is unbounded on that side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub from: Option<Timestamp>,
    pub to: Option<Timestamp>,
}

impl TimeWindow {
    pub fn new(from: Timestamp, to: Timestamp) -> Self {
        TimeWindow {
            from: Some(from),
            to: Some(to),
        }
    }

    pub fn unbounded() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        match (self.from, self.to) {
            (Some(f), Some(t)) if f > t => Err(StoreError::MalformedFilter("window from is after to".into())),
            _ => Ok(()),
        }
    }

    /// True when `[start, end]` overlaps the window.
    pub fn intersects(&self, start: Timestamp, end: Timestamp) -> bool {
        self.from.is_none_or(|f| end >= f) && self.to.is_none_or(|t| start <= t)
    }
}

/// Conjunctive annotation filter. Unset clauses match everything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationFilter {
    pub entity_id: Option<String>,
    pub tag_id: Option<TagId>,
    pub domain_id: Option<DomainId>,
    pub window: Option<TimeWindow>,
    /// Only located annotations inside the box match.
    pub bbox: Option<BBox>,
}

impl AnnotationFilter {
    pub fn validate(&self) -> Result<(), StoreError> {
        if let Some(w) = &self.window {
            w.validate()?;
        }
        if let Some(b) = &self.bbox {
            if !b.is_well_formed() {
                return Err(StoreError::MalformedFilter("bounding box min exceeds max".into()));
            }
        }
        Ok(())
    }

    /// Every clause except `domain_id`, which needs the tag directory.
    pub(crate) fn matches(&self, a: &Annotation) -> bool {
        self.entity_id.as_ref().is_none_or(|e| &a.entity_id == e)
            && self.tag_id.as_ref().is_none_or(|t| &a.tag_id == t)
            && self.window.is_none_or(|w| w.intersects(a.time_from, a.time_to))
            && self
                .bbox
                .is_none_or(|b| a.location.is_some_and(|p| b.contains(&p)))
    }
}

/// One conjunct of an entity query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityClause {
    pub tag_id: TagId,
    #[serde(default)]
    pub attribute: Option<String>,
}

impl EntityClause {
    pub fn tag(tag_id: TagId) -> Self {
        EntityClause { tag_id, attribute: None }
    }

    pub(crate) fn matches(&self, a: &Annotation) -> bool {
        a.tag_id == self.tag_id && self.attribute.as_ref().is_none_or(|attr| &a.attribute == attr)
    }
}
