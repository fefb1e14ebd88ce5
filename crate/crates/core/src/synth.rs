//! Synthetic PM10-style sensor experiment: a nominal training file and a
//! stream seeded with negative and over-limit readings.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::{Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::write_archive;
use crate::jobs::Observation;
use crate::time::Timestamp;

pub const TRAIN_FILE: &str = "train.csv";
pub const STREAM_FILE: &str = "stream.csv";
pub const ENTITY_TYPE: &str = "AirQualityObserved";
pub const ATTRIBUTE: &str = "pm10";
/// Lower end of the negative readings.
pub const NEGATIVE_MIN: f64 = -10.0;
pub const NEGATIVE_MAX: f64 = -0.1;
/// Width of the over-limit interval above `high_limit`.
pub const HIGH_SPREAD: f64 = 50.0;
/// Six sensors reporting every 15 minutes.
pub const SENSORS: usize = 6;
pub const ROW_SPACING_S: i64 = 15 * 60 / SENSORS as i64;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("bad spec: {0}")]
    BadSpec(String),
    #[error("writing {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_train: usize,
    pub n_stream: usize,
    pub band_low: f64,
    pub band_high: f64,
    pub frac_negative: f64,
    pub frac_high: f64,
    /// Over-limit readings are drawn from `(high_limit, high_limit + 50]`.
    pub high_limit: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_train: 1000,
            n_stream: 40000,
            band_low: 5.0,
            band_high: 45.0,
            frac_negative: 0.05,
            frac_high: 0.03,
            high_limit: 50.0,
            seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::BadSpec(m.to_owned()));
        if self.n_train == 0 || self.n_stream == 0 {
            return bad("row counts must be positive");
        }
        if !(self.band_low.is_finite() && self.band_high.is_finite() && self.band_low < self.band_high) {
            return bad("nominal band must satisfy low < high");
        }
        if self.band_low < 0.0 {
            return bad("nominal band must be non-negative");
        }
        if !self.high_limit.is_finite() || self.high_limit < self.band_high {
            return bad("high limit must be at least the band's upper edge");
        }
        let fracs = [self.frac_negative, self.frac_high];
        if fracs.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return bad("fractions must be non-negative");
        }
        if self.frac_negative + self.frac_high >= 1.0 {
            return bad("fractions must sum to less than 1");
        }
        Ok(())
    }

    pub fn negative_count(&self) -> usize {
        (self.frac_negative * self.n_stream as f64).floor() as usize
    }

    pub fn high_count(&self) -> usize {
        (self.frac_high * self.n_stream as f64).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    Nominal,
    Negative,
    High,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub train: Vec<Observation>,
    pub stream: Vec<Observation>,
    /// Kind of each stream row, index-aligned with `stream`.
    pub kinds: Vec<Kind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub train_path: PathBuf,
    pub stream_path: PathBuf,
    pub train_rows: usize,
    pub stream_rows: usize,
    pub negative_rows: usize,
    pub high_rows: usize,
}

fn start_time() -> Timestamp {
    Utc.with_ymd_and_hms(2016, 3, 1, 0, 0, 0).unwrap()
}

fn row(i: usize, value: f64, t0: Timestamp) -> Observation {
    let entity = format!("urn:sensor:pm10-{:02}", i % SENSORS + 1);
    Observation::numeric(
        &entity,
        Some(ENTITY_TYPE),
        ATTRIBUTE,
        value,
        t0 + Duration::seconds(ROW_SPACING_S * i as i64),
    )
}

/// Uniform in `[lo, hi)`.
fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + rng.random::<f64>() * (hi - lo)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let t0 = start_time();
    // Training rows precede the stream in time.
    let train_t0 = t0 - Duration::seconds(ROW_SPACING_S * spec.n_train as i64);
    let train = (0..spec.n_train)
        .map(|i| row(i, uniform(&mut rng, spec.band_low, spec.band_high), train_t0))
        .collect();

    let neg = spec.negative_count();
    let high = spec.high_count();
    let mut kinds: Vec<Kind> = (0..spec.n_stream)
        .map(|i| match i {
            i if i < neg => Kind::Negative,
            i if i < neg + high => Kind::High,
            _ => Kind::Nominal,
        })
        .collect();
    kinds.shuffle(&mut rng);

    let stream = kinds
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let v = match k {
                Kind::Nominal => uniform(&mut rng, spec.band_low, spec.band_high),
                Kind::Negative => uniform(&mut rng, NEGATIVE_MIN, NEGATIVE_MAX),
                // 1 - u lies in (0, 1], keeping the limit itself out.
                Kind::High => spec.high_limit + (1.0 - rng.random::<f64>()) * HIGH_SPREAD,
            };
            row(i, v, t0)
        })
        .collect();
    Ok(SynthData { train, stream, kinds })
}

fn write_file(path: &Path, rows: &[Observation]) -> Result<(), SynthError> {
    let io = |source: std::io::Error| SynthError::Io {
        path: path.to_owned(),
        source,
    };
    let f = File::create(path).map_err(io)?;
    write_archive(BufWriter::new(f), rows).map_err(|e| io(e.into()))
}

/// Generates and writes `train.csv` and `stream.csv` into `out_dir`.
pub fn write(spec: &SynthSpec, out_dir: &Path) -> Result<SynthSummary, SynthError> {
    let data = generate(spec)?;
    std::fs::create_dir_all(out_dir).map_err(|source| SynthError::Io {
        path: out_dir.to_owned(),
        source,
    })?;
    let train_path = out_dir.join(TRAIN_FILE);
    let stream_path = out_dir.join(STREAM_FILE);
    write_file(&train_path, &data.train)?;
    write_file(&stream_path, &data.stream)?;
    Ok(SynthSummary {
        train_path,
        stream_path,
        train_rows: data.train.len(),
        stream_rows: data.stream.len(),
        negative_rows: spec.negative_count(),
        high_rows: spec.high_count(),
    })
}
