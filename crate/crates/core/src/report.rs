//! Histogram and summary reports over archives or annotation values.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;

const CHUNK: usize = 8192;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("no values to report on")]
    EmptySource,
    #[error("bins must be at least 1")]
    ZeroBins,
    #[error("range must be finite with low < high")]
    BadRange,
    #[error("non-finite value in source")]
    NonFinite,
}

/// Closed band `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    /// `counts.len() + 1` strictly ascending edges.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
    pub band: Option<Band>,
    pub below: u64,
    pub above: u64,
}

impl HistogramReport {
    /// `bin_low,bin_high,count` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_low,bin_high,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", self.bin_edges[i], self.bin_edges[i + 1], c);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub band: Option<Band>,
    pub below: u64,
    pub above: u64,
}

fn band_counts(values: &[f64], band: Option<Band>) -> (u64, u64) {
    band.map_or((0, 0), |b| {
        let below = values.iter().filter(|v| **v < b.low).count() as u64;
        let above = values.iter().filter(|v| **v > b.high).count() as u64;
        (below, above)
    })
}

fn check(values: &[f64], band: Option<Band>) -> Result<(), ReportError> {
    if values.is_empty() {
        return Err(ReportError::EmptySource);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ReportError::NonFinite);
    }
    if band.is_some_and(|b| !(b.low.is_finite() && b.high.is_finite() && b.low <= b.high)) {
        return Err(ReportError::BadRange);
    }
    Ok(())
}

/// Equal-width histogram over `[min, max]` of the data, or over `range`
/// when given; values outside an explicit range land in the end bins.
pub fn histogram(
    values: &[f64],
    bins: usize,
    range: Option<(f64, f64)>,
    band: Option<Band>,
    exec: Exec,
) -> Result<HistogramReport, ReportError> {
    if bins == 0 {
        return Err(ReportError::ZeroBins);
    }
    check(values, band)?;
    let (lo, hi) = match range {
        Some((lo, hi)) if lo.is_finite() && hi.is_finite() && lo < hi => (lo, hi),
        Some(_) => return Err(ReportError::BadRange),
        None => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        }
    };
    let width = (hi - lo) / bins as f64;
    let bin_of = |v: f64| (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);

    let chunks: Vec<&[f64]> = values.chunks(CHUNK).collect();
    let partial = exec.map(&chunks, |chunk| {
        let mut c = vec![0u64; bins];
        for v in chunk.iter() {
            c[bin_of(*v)] += 1;
        }
        c
    });
    let mut counts = vec![0u64; bins];
    for p in partial {
        for (acc, x) in counts.iter_mut().zip(p) {
            *acc += x;
        }
    }
    let mut bin_edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    bin_edges.push(hi);
    let (below, above) = band_counts(values, band);
    Ok(HistogramReport {
        bin_edges,
        counts,
        total: values.len() as u64,
        band,
        below,
        above,
    })
}

pub fn summary(values: &[f64], band: Option<Band>) -> Result<Summary, ReportError> {
    check(values, band)?;
    let (below, above) = band_counts(values, band);
    Ok(Summary {
        total: values.len() as u64,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        band,
        below,
        above,
    })
}
