//! CSV archives replayed as an observation stream.
//!
//! Header: `entity_id,entity_type,attribute,value,timestamp,lat,lon`, with
//! `lat`/`lon` either both set or both empty.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::geo::GeoPoint;
use crate::jobs::Observation;
use crate::time::{self, Timestamp};

pub const CSV_HEADER: [&str; 7] = ["entity_id", "entity_type", "attribute", "value", "timestamp", "lat", "lon"];

/// Observations per dispatch when replaying as fast as possible.
pub const FAST_BATCH: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySpec {
    pub source_path: PathBuf,
    /// Observations per second; 0 replays as fast as possible.
    #[serde(default)]
    pub rate: f64,
    /// Archive seconds per wall second. Only consulted when `rate` is 0.
    #[serde(default)]
    pub time_compression: Option<f64>,
}

impl ReplaySpec {
    pub fn fast(path: impl Into<PathBuf>) -> Self {
        ReplaySpec {
            source_path: path.into(),
            rate: 0.0,
            time_compression: None,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(IngestError::InvalidReplay("rate must be >= 0".into()));
        }
        if self.time_compression.is_some_and(|c| !(c.is_finite() && c > 0.0)) {
            return Err(IngestError::InvalidReplay("time compression must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub observations: u64,
    pub duration_ms: u64,
    /// Annotations produced during the replay, by tag name.
    pub annotations: BTreeMap<String, u64>,
    /// Archive time between first and last observation.
    pub archive_span_ms: i64,
    /// Mean archive-time gap between consecutive observations, seconds.
    pub mean_interarrival_s: f64,
}

#[derive(Debug, Deserialize)]
struct Row {
    entity_id: String,
    entity_type: String,
    attribute: String,
    value: String,
    timestamp: String,
    lat: String,
    lon: String,
}

fn row_to_observation(row: Row, line: u64) -> Result<Observation, IngestError> {
    let bad = |reason: String| IngestError::BadRow { row: line, reason };
    if row.entity_id.is_empty() || row.attribute.is_empty() {
        return Err(bad("entity_id and attribute are required".into()));
    }
    let value: f64 = row
        .value
        .trim()
        .parse()
        .map_err(|_| bad(format!("value {:?} is not a number", row.value)))?;
    if !value.is_finite() {
        return Err(bad("value must be finite".into()));
    }
    let timestamp = time::parse(&row.timestamp).map_err(|e| bad(format!("timestamp: {e}")))?;
    let location = match (row.lat.trim(), row.lon.trim()) {
        ("", "") => None,
        (lat, lon) => {
            let p = GeoPoint {
                lat: lat.parse().map_err(|_| bad("lat is not a number".into()))?,
                lon: lon.parse().map_err(|_| bad("lon is not a number".into()))?,
            };
            if !p.is_valid() {
                return Err(bad("coordinates out of range".into()));
            }
            Some(p)
        }
    };
    Ok(Observation {
        entity_id: row.entity_id,
        entity_type: (!row.entity_type.is_empty()).then_some(row.entity_type),
        attribute: row.attribute,
        value: Some(value),
        timestamp,
        location,
    })
}

/// Reads a whole archive, stably sorted by timestamp. An empty file (no
/// header) is an empty archive. Row numbers in errors count the header as
/// row 1.
pub fn read_archive(path: &Path) -> Result<Vec<Observation>, IngestError> {
    if !path.exists() {
        return Err(IngestError::FileNotFound(path.to_owned()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| IngestError::BadRow {
            row: 1,
            reason: e.to_string(),
        })?;
    let header = reader.headers().map_err(|e| IngestError::BadRow {
        row: 1,
        reason: e.to_string(),
    })?;
    if header.is_empty() {
        return Ok(Vec::new());
    }
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(IngestError::BadRow {
            row: 1,
            reason: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<Row>().enumerate() {
        let line = i as u64 + 2;
        let row = rec.map_err(|e| IngestError::BadRow {
            row: line,
            reason: e.to_string(),
        })?;
        out.push(row_to_observation(row, line)?);
    }
    out.sort_by_key(|o| o.timestamp);
    Ok(out)
}

/// Writes observations in archive format.
pub fn write_archive<W: std::io::Write>(w: W, observations: &[Observation]) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for o in observations {
        let (lat, lon) = o
            .location
            .map_or((String::new(), String::new()), |p| (p.lat.to_string(), p.lon.to_string()));
        wr.write_record([
            o.entity_id.as_str(),
            o.entity_type.as_deref().unwrap_or(""),
            o.attribute.as_str(),
            &o.value.map_or(String::new(), |v| v.to_string()),
            &time::format(&o.timestamp),
            &lat,
            &lon,
        ])?;
    }
    wr.flush()?;
    Ok(())
}

fn span_stats(obs: &[Observation]) -> (i64, f64) {
    match (obs.first(), obs.last()) {
        (Some(a), Some(b)) if obs.len() > 1 => {
            let span = (b.timestamp - a.timestamp).num_milliseconds();
            (span, span as f64 / 1000.0 / (obs.len() - 1) as f64)
        }
        _ => (0, 0.0),
    }
}

/// Replays an archive through `dispatch`, which receives batches in
/// timestamp order and returns per-tag annotation counts for the batch.
/// Pacing follows `rate`, or archive time scaled by `time_compression`,
/// or neither.
pub fn replay<F>(spec: &ReplaySpec, mut dispatch: F) -> Result<ReplayReport, IngestError>
where
    F: FnMut(&[Observation]) -> Result<BTreeMap<String, u64>, IngestError>,
{
    spec.validate()?;
    let observations = read_archive(&spec.source_path)?;
    let started = Instant::now();
    let mut report = ReplayReport::default();
    let (span, mean) = span_stats(&observations);
    report.archive_span_ms = span;
    report.mean_interarrival_s = mean;

    let mut absorb = |batch: &[Observation], report: &mut ReplayReport| -> Result<(), IngestError> {
        for (tag, n) in dispatch(batch)? {
            *report.annotations.entry(tag).or_default() += n;
        }
        report.observations += batch.len() as u64;
        Ok(())
    };

    if spec.rate > 0.0 {
        let gap = Duration::from_secs_f64(1.0 / spec.rate);
        for (i, o) in observations.iter().enumerate() {
            let due = started + gap * i as u32;
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
            absorb(std::slice::from_ref(o), &mut report)?;
        }
    } else if let (Some(c), Some(first)) = (spec.time_compression, observations.first()) {
        let t0: Timestamp = first.timestamp;
        for o in &observations {
            let archive = (o.timestamp - t0).to_std().unwrap_or_default();
            let due = started + archive.div_f64(c);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
            absorb(std::slice::from_ref(o), &mut report)?;
        }
    } else {
        for batch in observations.chunks(FAST_BATCH) {
            absorb(batch, &mut report)?;
        }
    }
    report.duration_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}
