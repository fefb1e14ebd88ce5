//! Local outlier factor against a fixed reference set.
//!
//! The k-neighbourhood of a point is every reference point whose distance
//! does not exceed the k-th smallest distance, so ties at the boundary are
//! all included. Distances are Euclidean. Reference-set k-distances and
//! local reachability densities are computed once per training state and
//! cached; scoring a query then costs one pass over the reference set.

use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::{AnomalyDetector, FeatureVector, MlError};
use crate::exec::Exec;

/// Floor on the mean reachability distance.
pub const LOF_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LofModel {
    k: usize,
    dimension: usize,
    capacity: Option<usize>,
    #[serde(default)]
    normalize: bool,
    points: VecDeque<FeatureVector>,
    #[serde(skip)]
    cache: OnceLock<Arc<Cache>>,
}

impl PartialEq for LofModel {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k
            && self.dimension == other.dimension
            && self.capacity == other.capacity
            && self.normalize == other.normalize
            && self.points == other.points
    }
}

#[derive(Debug)]
struct Cache {
    /// Reference coordinates, z-scored when normalization is on.
    coords: Vec<Vec<f64>>,
    k_distance: Vec<f64>,
    lrd: Vec<f64>,
    /// Per-dimension (mean, stddev) used to transform queries.
    scale: Option<Vec<(f64, f64)>>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Indices and distances of the k-neighbourhood of `q`, ties included.
/// `skip` excludes one reference index (the query itself).
fn neighbourhood(coords: &[Vec<f64>], q: &[f64], k: usize, skip: Option<usize>) -> (f64, Vec<(usize, f64)>) {
    let mut d: Vec<(usize, f64)> = coords
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, c)| (i, distance(c, q)))
        .collect();
    let (_, kth, _) = d.select_nth_unstable_by(k - 1, |a, b| a.1.total_cmp(&b.1));
    let k_dist = kth.1;
    d.retain(|(_, dist)| *dist <= k_dist);
    (k_dist, d)
}

fn reach_density(neigh: &[(usize, f64)], k_distance: &[f64]) -> f64 {
    let mean = neigh.iter().map(|(o, d)| k_distance[*o].max(*d)).sum::<f64>() / neigh.len() as f64;
    1.0 / mean.max(LOF_EPSILON)
}

impl Cache {
    fn build(points: &VecDeque<FeatureVector>, k: usize, normalize: bool, exec: Exec) -> Cache {
        let dim = points.front().map_or(0, |p| p.dim());
        let scale = normalize.then(|| {
            let n = points.len() as f64;
            (0..dim)
                .map(|j| {
                    let mean = points.iter().map(|p| p.values()[j]).sum::<f64>() / n;
                    let var = points.iter().map(|p| (p.values()[j] - mean).powi(2)).sum::<f64>() / n;
                    let sd = var.sqrt();
                    (mean, if sd > 0.0 { sd } else { 1.0 })
                })
                .collect::<Vec<_>>()
        });
        let coords: Vec<Vec<f64>> = points.iter().map(|p| transform(p.values(), scale.as_deref())).collect();
        let neighs = exec.map_range(coords.len(), |i| neighbourhood(&coords, &coords[i], k, Some(i)));
        let k_distance: Vec<f64> = neighs.iter().map(|(kd, _)| *kd).collect();
        let lrd = exec.map(&neighs, |(_, n)| reach_density(n, &k_distance));
        Cache {
            coords,
            k_distance,
            lrd,
            scale,
        }
    }

    fn score(&self, q: &[f64], k: usize) -> f64 {
        let q = transform(q, self.scale.as_deref());
        let (_, neigh) = neighbourhood(&self.coords, &q, k, None);
        let lrd_q = reach_density(&neigh, &self.k_distance);
        neigh.iter().map(|(o, _)| self.lrd[*o] / lrd_q).sum::<f64>() / neigh.len() as f64
    }
}

fn transform(v: &[f64], scale: Option<&[(f64, f64)]>) -> Vec<f64> {
    match scale {
        None => v.to_vec(),
        Some(s) => v.iter().zip(s).map(|(x, (m, sd))| (x - m) / sd).collect(),
    }
}

impl LofModel {
    pub fn new(k: usize, dimension: usize, capacity: Option<usize>) -> Result<Self, MlError> {
        if k == 0 {
            return Err(MlError::InvalidConfig("k must be at least 1".into()));
        }
        if dimension == 0 {
            return Err(MlError::InvalidConfig("dimension must be at least 1".into()));
        }
        if capacity.is_some_and(|c| c <= k) {
            return Err(MlError::InvalidConfig("capacity must exceed k".into()));
        }
        Ok(LofModel {
            k,
            dimension,
            capacity,
            normalize: false,
            points: VecDeque::new(),
            cache: OnceLock::new(),
        })
    }

    /// Enables z-scoring with the reference set's mean and stddev.
    pub fn with_normalization(mut self, on: bool) -> Self {
        self.normalize = on;
        self.invalidate();
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &FeatureVector> {
        self.points.iter()
    }

    pub(crate) fn invalidate(&mut self) {
        self.cache = OnceLock::new();
    }

    /// Appends `batch` to the reference set, evicting the oldest points
    /// beyond `capacity`. The batch is validated as a whole first.
    pub fn lof_train(&mut self, batch: &[FeatureVector]) -> Result<(), MlError> {
        for p in batch {
            p.expect_dim(self.dimension)?;
        }
        self.points.extend(batch.iter().cloned());
        if let Some(cap) = self.capacity {
            while self.points.len() > cap {
                self.points.pop_front();
            }
        }
        self.invalidate();
        Ok(())
    }

    fn cache(&self, exec: Exec) -> &Cache {
        self.cache
            .get_or_init(|| Arc::new(Cache::build(&self.points, self.k, self.normalize, exec)))
    }

    fn check_query(&self, p: &FeatureVector) -> Result<(), MlError> {
        p.expect_dim(self.dimension)?;
        if self.points.len() <= self.k {
            return Err(MlError::InsufficientTraining {
                have: self.points.len(),
                k: self.k,
            });
        }
        Ok(())
    }

    pub fn lof_score(&self, p: &FeatureVector) -> Result<f64, MlError> {
        self.check_query(p)?;
        Ok(self.cache(Exec::default()).score(p.values(), self.k))
    }

    /// Scores many points. With [`Exec::Parallel`] the reference cache and
    /// the queries are both processed in parallel.
    pub fn score_batch(&self, ps: &[FeatureVector], exec: Exec) -> Vec<Result<f64, MlError>> {
        if let Some(p) = ps.first() {
            if let Err(e) = self.check_query(p) {
                return ps.iter().map(|_| Err(e.clone())).collect();
            }
        }
        let cache = self.cache(exec);
        exec.map(ps, |p| {
            p.expect_dim(self.dimension)?;
            Ok(cache.score(p.values(), self.k))
        })
    }
}

impl AnomalyDetector for LofModel {
    fn train(&mut self, batch: &[FeatureVector]) -> Result<(), MlError> {
        self.lof_train(batch)
    }

    fn score(&self, p: &FeatureVector) -> Result<f64, MlError> {
        self.lof_score(p)
    }

    fn min_training(&self) -> usize {
        self.k + 1
    }
}
