//! Directory of tag domains, tags and annotations.
//!
//! The store is a small property graph: domains own tags (`HAS_TAG`), tags
//! link to each other through symmetric `RELATED` edges, and annotations
//! point at one tag each (`ANNOTATES`). All state lives in memory behind a
//! single reader/writer lock; every mutation is journaled before it is
//! applied, so a store opened over the same journal comes back identical.

mod query;
mod types;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use parking_lot::RwLock;
use thiserror::Error;

use crate::ids::{AnnotationId, DomainId, JobId, TagId};
use crate::journal::{Journal, JournalError, Mutation};
use crate::time::Timestamp;

pub use query::{AnnotationFilter, EntityClause, TimeWindow};
pub use types::{Annotation, Annotator, NewAnnotation, Tag, TagDomain};

/// Maximum number of `RELATED` hops explored when suggesting tags.
pub const SUGGESTION_HOPS: usize = 2;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("a tag domain named {0:?} already exists")]
    DuplicateDomainName(String),
    #[error("tag list is empty")]
    EmptyTagList,
    #[error("duplicate tag name {0:?}")]
    DuplicateTagName(String),
    #[error("name must not be empty")]
    EmptyName,
    #[error("unknown tag domain {0}")]
    UnknownDomain(DomainId),
    #[error("unknown tag {0}")]
    UnknownTag(TagId),
    #[error("unknown annotation {0}")]
    UnknownAnnotation(AnnotationId),
    #[error("a tag cannot be related to itself")]
    SelfRelation,
    #[error("time_from is after time_to")]
    InvalidInterval,
    #[error("coordinates out of range")]
    InvalidCoordinates,
    #[error("confidence must lie in [0, 1]")]
    InvalidConfidence,
    #[error("malformed filter: {0}")]
    MalformedFilter(String),
    #[error(transparent)]
    Storage(#[from] JournalError),
}

#[derive(Debug, Default)]
struct Inner {
    domains: BTreeMap<DomainId, TagDomain>,
    domain_names: HashMap<String, DomainId>,
    tags: HashMap<TagId, Tag>,
    /// Annotations in (time_from, id) order, which is also query order.
    annotations: BTreeMap<(Timestamp, AnnotationId), Annotation>,
    annotation_keys: HashMap<AnnotationId, Timestamp>,
    per_job: HashMap<JobId, u64>,
}

impl Inner {
    fn insert_domain(&mut self, d: TagDomain) {
        self.domain_names.insert(d.name.clone(), d.id.clone());
        self.domains.insert(d.id.clone(), d);
    }

    fn insert_tag(&mut self, t: Tag) {
        if let Some(d) = self.domains.get_mut(&t.domain_id) {
            if !d.tag_ids.contains(&t.id) {
                d.tag_ids.push(t.id.clone());
            }
        }
        self.tags.insert(t.id.clone(), t);
    }

    fn relate(&mut self, a: &TagId, b: &TagId) {
        if let Some(t) = self.tags.get_mut(a) {
            t.related_tag_ids.insert(b.clone());
        }
        if let Some(t) = self.tags.get_mut(b) {
            t.related_tag_ids.insert(a.clone());
        }
    }

    fn insert_annotation(&mut self, a: Annotation) {
        if let Annotator::Job(job) = &a.annotator {
            *self.per_job.entry(job.clone()).or_default() += 1;
        }
        self.annotation_keys.insert(a.id.clone(), a.time_from);
        self.annotations.insert((a.time_from, a.id.clone()), a);
    }

    fn tag_in_domain(&self, tag: &TagId, domain: &DomainId) -> bool {
        self.tags.get(tag).is_some_and(|t| &t.domain_id == domain)
    }
}

/// Thread-safe tag-graph store. Cheap to share behind an `Arc`.
#[derive(Debug)]
pub struct TagStore {
    inner: RwLock<Inner>,
    journal: Arc<Journal>,
}

impl Default for TagStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl TagStore {
    pub fn in_memory() -> Self {
        Self::with_journal(Arc::new(Journal::in_memory()))
    }

    pub fn with_journal(journal: Arc<Journal>) -> Self {
        TagStore {
            inner: RwLock::new(Inner::default()),
            journal,
        }
    }

    /// Applies a replayed journal record. Records that are not about the
    /// tag graph are ignored.
    pub fn apply(&self, m: &Mutation) {
        let mut inner = self.inner.write();
        match m {
            Mutation::PutDomain(d) => inner.insert_domain(d.clone()),
            Mutation::PutTag(t) => inner.insert_tag(t.clone()),
            Mutation::RelateTags { tag_a, tag_b } => inner.relate(tag_a, tag_b),
            Mutation::PutAnnotation(a) => inner.insert_annotation(a.clone()),
            _ => {}
        }
    }

    pub fn create_tag_domain(
        &self,
        name: &str,
        description: &str,
        tag_names: &[String],
    ) -> Result<TagDomain, StoreError> {
        if name.trim().is_empty() {
            return Err(StoreError::EmptyName);
        }
        if tag_names.is_empty() {
            return Err(StoreError::EmptyTagList);
        }
        let mut seen = HashSet::new();
        for t in tag_names {
            if t.trim().is_empty() {
                return Err(StoreError::EmptyName);
            }
            if !seen.insert(t.as_str()) {
                return Err(StoreError::DuplicateTagName(t.clone()));
            }
        }
        let mut inner = self.inner.write();
        if inner.domain_names.contains_key(name) {
            return Err(StoreError::DuplicateDomainName(name.to_owned()));
        }
        let domain_id = DomainId::generate();
        let tags: Vec<Tag> = tag_names
            .iter()
            .map(|n| Tag {
                id: TagId::generate(),
                name: n.clone(),
                domain_id: domain_id.clone(),
                related_tag_ids: BTreeSet::new(),
            })
            .collect();
        let domain = TagDomain {
            id: domain_id,
            name: name.to_owned(),
            description: description.to_owned(),
            tag_ids: Vec::new(),
        };
        let id = domain.id.clone();
        self.journal.append(&Mutation::PutDomain(domain.clone()))?;
        inner.insert_domain(domain);
        for t in tags {
            self.journal.append(&Mutation::PutTag(t.clone()))?;
            inner.insert_tag(t);
        }
        Ok(inner.domains[&id].clone())
    }

    pub fn add_tag(&self, domain_id: &DomainId, name: &str) -> Result<Tag, StoreError> {
        if name.trim().is_empty() {
            return Err(StoreError::EmptyName);
        }
        let mut inner = self.inner.write();
        let domain = inner
            .domains
            .get(domain_id)
            .ok_or_else(|| StoreError::UnknownDomain(domain_id.clone()))?;
        if domain.tag_ids.iter().any(|id| inner.tags[id].name == name) {
            return Err(StoreError::DuplicateTagName(name.to_owned()));
        }
        let tag = Tag {
            id: TagId::generate(),
            name: name.to_owned(),
            domain_id: domain_id.clone(),
            related_tag_ids: BTreeSet::new(),
        };
        self.journal.append(&Mutation::PutTag(tag.clone()))?;
        inner.insert_tag(tag.clone());
        Ok(tag)
    }

    /// Records a symmetric `RELATED` edge. Relating an already related pair
    /// is a no-op and writes nothing.
    pub fn relate_tags(&self, a: &TagId, b: &TagId) -> Result<(), StoreError> {
        let mut inner = self.inner.write();
        for id in [a, b] {
            if !inner.tags.contains_key(id) {
                return Err(StoreError::UnknownTag(id.clone()));
            }
        }
        if a == b {
            return Err(StoreError::SelfRelation);
        }
        if inner.tags[a].related_tag_ids.contains(b) {
            return Ok(());
        }
        self.journal.append(&Mutation::RelateTags {
            tag_a: a.clone(),
            tag_b: b.clone(),
        })?;
        inner.relate(a, b);
        Ok(())
    }

    /// Tags of `domain_id` within [`SUGGESTION_HOPS`] related-hops of any
    /// seed, nearest first, then by name. Seeds themselves are never
    /// returned. With no seeds every tag of the domain is returned by name.
    pub fn suggest_tags(&self, domain_id: &DomainId, seeds: &[TagId]) -> Result<Vec<Tag>, StoreError> {
        let inner = self.inner.read();
        let domain = inner
            .domains
            .get(domain_id)
            .ok_or_else(|| StoreError::UnknownDomain(domain_id.clone()))?;
        for s in seeds {
            if !inner.tags.contains_key(s) {
                return Err(StoreError::UnknownTag(s.clone()));
            }
        }
        if seeds.is_empty() {
            let mut all: Vec<Tag> = domain.tag_ids.iter().map(|id| inner.tags[id].clone()).collect();
            all.sort_by(|x, y| x.name.cmp(&y.name).then_with(|| x.id.cmp(&y.id)));
            return Ok(all);
        }

        let mut dist: HashMap<&TagId, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        for s in seeds {
            if dist.insert(s, 0).is_none() {
                queue.push_back(s);
            }
        }
        while let Some(cur) = queue.pop_front() {
            let d = dist[cur];
            if d == SUGGESTION_HOPS {
                continue;
            }
            for next in &inner.tags[cur].related_tag_ids {
                if !dist.contains_key(next) {
                    dist.insert(next, d + 1);
                    queue.push_back(next);
                }
            }
        }
        let mut found: Vec<(usize, &Tag)> = dist
            .into_iter()
            .filter(|(_, d)| *d > 0)
            .map(|(id, d)| (d, &inner.tags[id]))
            .filter(|(_, t)| &t.domain_id == domain_id)
            .collect();
        found.sort_by(|(da, a), (db, b)| da.cmp(db).then_with(|| a.name.cmp(&b.name)).then_with(|| a.id.cmp(&b.id)));
        Ok(found.into_iter().map(|(_, t)| t.clone()).collect())
    }

    pub fn record_annotation(&self, new: NewAnnotation) -> Result<Annotation, StoreError> {
        new.validate()?;
        let mut inner = self.inner.write();
        if !inner.tags.contains_key(&new.tag_id) {
            return Err(StoreError::UnknownTag(new.tag_id.clone()));
        }
        let a = new.into_annotation(AnnotationId::generate());
        self.journal.append(&Mutation::PutAnnotation(a.clone()))?;
        inner.insert_annotation(a.clone());
        Ok(a)
    }

    /// Annotations matching every clause of `filter`, ordered by
    /// `time_from` then id.
    pub fn query_annotations(&self, filter: &AnnotationFilter) -> Result<Vec<Annotation>, StoreError> {
        filter.validate()?;
        let inner = self.inner.read();
        let domain_tags = filter.domain_id.as_ref().map(|d| {
            inner
                .domains
                .get(d)
                .map(|dom| dom.tag_ids.iter().collect::<HashSet<_>>())
                .unwrap_or_default()
        });
        let upper = filter.window.as_ref().and_then(|w| w.to);
        let candidates = inner.annotations.values().take_while(|a| upper.is_none_or(|to| a.time_from <= to));
        Ok(candidates
            .filter(|a| filter.matches(a))
            .filter(|a| domain_tags.as_ref().is_none_or(|set| set.contains(&a.tag_id)))
            .cloned()
            .collect())
    }

    /// Entities that have, for every clause, at least one annotation with
    /// the clause's tag (and attribute, if given) intersecting `window`
    /// (and located inside `area`, if given). Sorted and deduplicated.
    pub fn conjunctive_entity_query(
        &self,
        clauses: &[EntityClause],
        window: &TimeWindow,
        area: Option<&crate::geo::BBox>,
    ) -> Result<Vec<String>, StoreError> {
        if clauses.is_empty() {
            return Err(StoreError::MalformedFilter("at least one clause is required".into()));
        }
        window.validate()?;
        if let Some(b) = area {
            if !b.is_well_formed() {
                return Err(StoreError::MalformedFilter("bounding box min exceeds max".into()));
            }
        }
        let inner = self.inner.read();
        let mut sets: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); clauses.len()];
        for a in inner.annotations.values() {
            if !window.intersects(a.time_from, a.time_to) {
                continue;
            }
            if let Some(b) = area {
                if !a.location.is_some_and(|p| b.contains(&p)) {
                    continue;
                }
            }
            for (clause, set) in clauses.iter().zip(sets.iter_mut()) {
                if clause.matches(a) {
                    set.insert(a.entity_id.as_str());
                }
            }
        }
        let mut iter = sets.into_iter();
        let mut acc = iter.next().unwrap_or_default();
        for s in iter {
            acc = acc.intersection(&s).copied().collect();
        }
        Ok(acc.into_iter().map(str::to_owned).collect())
    }

    pub fn domain(&self, id: &DomainId) -> Option<TagDomain> {
        self.inner.read().domains.get(id).cloned()
    }

    /// All domains in id (creation) order.
    pub fn domains(&self) -> Vec<TagDomain> {
        self.inner.read().domains.values().cloned().collect()
    }

    pub fn tag(&self, id: &TagId) -> Option<Tag> {
        self.inner.read().tags.get(id).cloned()
    }

    /// Tags of a domain in domain order.
    pub fn domain_tags(&self, id: &DomainId) -> Option<Vec<Tag>> {
        let inner = self.inner.read();
        let d = inner.domains.get(id)?;
        Some(d.tag_ids.iter().map(|t| inner.tags[t].clone()).collect())
    }

    pub fn tag_in_domain(&self, tag: &TagId, domain: &DomainId) -> bool {
        self.inner.read().tag_in_domain(tag, domain)
    }

    pub fn annotation(&self, id: &AnnotationId) -> Option<Annotation> {
        let inner = self.inner.read();
        let t = inner.annotation_keys.get(id)?;
        inner.annotations.get(&(*t, id.clone())).cloned()
    }

    pub fn annotation_count(&self) -> usize {
        self.inner.read().annotations.len()
    }

    pub fn annotations_by_job(&self, job: &JobId) -> u64 {
        self.inner.read().per_job.get(job).copied().unwrap_or(0)
    }

    pub fn is_healthy(&self) -> bool {
        self.journal.is_healthy()
    }

    /// Full-scan referential integrity check: every annotation points at an
    /// existing tag, every tag at an existing domain, every domain lists
    /// only existing tags, and no tag is related to itself or to a missing
    /// tag.
    pub fn check_integrity(&self) -> bool {
        let inner = self.inner.read();
        let tags_ok = inner.tags.values().all(|t| {
            inner.domains.contains_key(&t.domain_id)
                && !t.related_tag_ids.contains(&t.id)
                && t.related_tag_ids.iter().all(|r| inner.tags.contains_key(r))
        });
        let domains_ok = inner.domains.values().all(|d| {
            let uniq: HashSet<_> = d.tag_ids.iter().collect();
            uniq.len() == d.tag_ids.len() && d.tag_ids.iter().all(|t| inner.tags.contains_key(t))
        });
        let ann_ok = inner.annotations.values().all(|a| inner.tags.contains_key(&a.tag_id));
        tags_ok && domains_ok && ann_ok
    }
}
