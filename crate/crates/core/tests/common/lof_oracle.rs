//! Brute-force local outlier factor, written from the textbook definition
//! with full sorts and no caching.

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// k-distance and k-neighbourhood (every point within the k-distance) of
/// `p` among `data`, leaving out index `skip`.
fn k_neighbours(data: &[Vec<f64>], p: &[f64], k: usize, skip: Option<usize>) -> (f64, Vec<usize>) {
    let mut all: Vec<(f64, usize)> = data
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, o)| (dist(p, o), i))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let kd = all[k - 1].0;
    (kd, all.into_iter().filter(|(d, _)| *d <= kd).map(|(_, i)| i).collect())
}

fn lrd(data: &[Vec<f64>], kdist: &[f64], p: &[f64], k: usize, skip: Option<usize>) -> f64 {
    let (_, nb) = k_neighbours(data, p, k, skip);
    let total: f64 = nb.iter().map(|&o| f64::max(kdist[o], dist(p, &data[o]))).sum();
    1.0 / f64::max(total / nb.len() as f64, 1e-12)
}

/// Reference set with its k-distances precomputed.
pub struct Oracle<'a> {
    data: &'a [Vec<f64>],
    k: usize,
    kdist: Vec<f64>,
}

impl<'a> Oracle<'a> {
    pub fn new(data: &'a [Vec<f64>], k: usize) -> Self {
        let kdist = (0..data.len()).map(|i| k_neighbours(data, &data[i], k, Some(i)).0).collect();
        Oracle { data, k, kdist }
    }

    /// LOF of `q` against the reference set.
    pub fn lof(&self, q: &[f64]) -> f64 {
        let lrd_q = lrd(self.data, &self.kdist, q, self.k, None);
        let (_, nb) = k_neighbours(self.data, q, self.k, None);
        let ratios: f64 = nb
            .iter()
            .map(|&o| lrd(self.data, &self.kdist, &self.data[o], self.k, Some(o)) / lrd_q)
            .sum();
        ratios / nb.len() as f64
    }
}
