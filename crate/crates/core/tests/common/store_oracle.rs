//! Random annotation stores and linear-scan reference queries.

use std::collections::BTreeSet;

use chrono::{Duration, TimeZone, Utc};
use rand::Rng;
use tagflow::geo::{BBox, GeoPoint};
use tagflow::ids::TagId;
use tagflow::tagstore::{Annotation, AnnotationFilter, Annotator, EntityClause, NewAnnotation, Tag, TagStore, TimeWindow};
use tagflow::time::Timestamp;

const ENTITIES: usize = 25;
const ATTRIBUTES: [&str; 3] = ["pm10", "no2", "speed"];

pub struct RandomStore {
    pub store: TagStore,
    pub tags: Vec<Tag>,
    pub annotations: Vec<Annotation>,
}

fn t(minutes: i64) -> Timestamp {
    Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap() + Duration::minutes(minutes)
}

pub fn random_store<R: Rng>(rng: &mut R, max_annotations: usize) -> RandomStore {
    let store = TagStore::in_memory();
    let mut tags = Vec::new();
    for d in 0..rng.random_range(1..=3) {
        let names: Vec<String> = (0..rng.random_range(2..=4)).map(|i| format!("t{d}-{i}")).collect();
        let dom = store.create_tag_domain(&format!("d{d}"), "", &names).unwrap();
        tags.extend(store.domain_tags(&dom.id).unwrap());
    }
    let n = rng.random_range(0..=max_annotations);
    let mut annotations = Vec::with_capacity(n);
    for _ in 0..n {
        let tag = &tags[rng.random_range(0..tags.len())];
        let from = rng.random_range(0..2000);
        let len = if rng.random_bool(0.3) { 0 } else { rng.random_range(0..120) };
        let mut new = NewAnnotation::point(
            &format!("e{}", rng.random_range(0..ENTITIES)),
            ATTRIBUTES[rng.random_range(0..ATTRIBUTES.len())],
            tag.id.clone(),
            t(from),
            Annotator::User("oracle".into()),
        );
        new.time_to = t(from + len);
        if rng.random_bool(0.6) {
            new.location = Some(GeoPoint {
                lat: rng.random_range(51.0..52.0),
                lon: rng.random_range(-1.0..1.0),
            });
        }
        annotations.push(store.record_annotation(new).unwrap());
    }
    RandomStore {
        store,
        tags,
        annotations,
    }
}

fn random_window<R: Rng>(rng: &mut R) -> TimeWindow {
    let a = rng.random_range(-100..2200);
    let b = a + rng.random_range(0..600);
    TimeWindow {
        from: rng.random_bool(0.8).then(|| t(a)),
        to: rng.random_bool(0.8).then(|| t(b)),
    }
}

fn random_bbox<R: Rng>(rng: &mut R) -> BBox {
    let lat = rng.random_range(50.9..52.0);
    let lon = rng.random_range(-1.1..1.0);
    BBox {
        min_lon: lon,
        min_lat: lat,
        max_lon: lon + rng.random_range(0.0..1.2),
        max_lat: lat + rng.random_range(0.0..0.8),
    }
}

pub fn random_filter<R: Rng>(rng: &mut R, s: &RandomStore) -> AnnotationFilter {
    AnnotationFilter {
        entity_id: rng
            .random_bool(0.4)
            .then(|| format!("e{}", rng.random_range(0..ENTITIES))),
        tag_id: rng
            .random_bool(0.4)
            .then(|| s.tags[rng.random_range(0..s.tags.len())].id.clone()),
        domain_id: rng
            .random_bool(0.3)
            .then(|| s.tags[rng.random_range(0..s.tags.len())].domain_id.clone()),
        window: rng.random_bool(0.5).then(|| random_window(rng)),
        bbox: rng.random_bool(0.3).then(|| random_bbox(rng)),
    }
}

pub fn random_clauses<R: Rng>(rng: &mut R, s: &RandomStore) -> (Vec<EntityClause>, TimeWindow, Option<BBox>) {
    let clauses = (0..rng.random_range(1..=3))
        .map(|_| EntityClause {
            tag_id: s.tags[rng.random_range(0..s.tags.len())].id.clone(),
            attribute: rng
                .random_bool(0.3)
                .then(|| ATTRIBUTES[rng.random_range(0..ATTRIBUTES.len())].to_owned()),
        })
        .collect();
    let window = if rng.random_bool(0.5) {
        random_window(rng)
    } else {
        TimeWindow::default()
    };
    (clauses, window, rng.random_bool(0.2).then(|| random_bbox(rng)))
}

fn in_window(a: &Annotation, w: &TimeWindow) -> bool {
    w.from.is_none_or(|f| a.time_to >= f) && w.to.is_none_or(|to| a.time_from <= to)
}

fn in_box(a: &Annotation, b: &BBox) -> bool {
    match a.location {
        None => false,
        Some(p) => b.min_lon <= p.lon && p.lon <= b.max_lon && b.min_lat <= p.lat && p.lat <= b.max_lat,
    }
}

fn domain_of<'a>(tags: &'a [Tag], id: &TagId) -> &'a tagflow::ids::DomainId {
    &tags.iter().find(|t| &t.id == id).unwrap().domain_id
}

/// Annotations passing every set clause, ordered by start time then id.
pub fn scan_annotations(s: &RandomStore, f: &AnnotationFilter) -> Vec<Annotation> {
    let mut out: Vec<Annotation> = s
        .annotations
        .iter()
        .filter(|a| f.entity_id.as_ref().is_none_or(|e| &a.entity_id == e))
        .filter(|a| f.tag_id.as_ref().is_none_or(|t| &a.tag_id == t))
        .filter(|a| f.domain_id.as_ref().is_none_or(|d| domain_of(&s.tags, &a.tag_id) == d))
        .filter(|a| f.window.as_ref().is_none_or(|w| in_window(a, w)))
        .filter(|a| f.bbox.as_ref().is_none_or(|b| in_box(a, b)))
        .cloned()
        .collect();
    out.sort_by(|a, b| (a.time_from, &a.id).cmp(&(b.time_from, &b.id)));
    out
}

/// Entities satisfying every clause, by intersecting per-clause sets.
pub fn scan_entities(s: &RandomStore, clauses: &[EntityClause], w: &TimeWindow, b: Option<&BBox>) -> Vec<String> {
    let mut result: Option<BTreeSet<String>> = None;
    for c in clauses {
        let set: BTreeSet<String> = s
            .annotations
            .iter()
            .filter(|a| a.tag_id == c.tag_id)
            .filter(|a| c.attribute.as_ref().is_none_or(|x| &a.attribute == x))
            .filter(|a| in_window(a, w))
            .filter(|a| b.is_none_or(|b| in_box(a, b)))
            .map(|a| a.entity_id.clone())
            .collect();
        result = Some(match result {
            None => set,
            Some(prev) => prev.intersection(&set).cloned().collect(),
        });
    }
    result.unwrap_or_default().into_iter().collect()
}
