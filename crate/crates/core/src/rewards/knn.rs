use crate::error::{Error, Result};

/// Exact brute-force Euclidean k-nearest-neighbour index.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnIndex {
    dim: usize,
    points: Vec<f64>,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl KnnIndex {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            points: Vec::new(),
        }
    }

    /// Index over `points.len() / dim` rows of a flat buffer.
    pub fn from_flat(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.len() % dim != 0 {
            return Err(Error::shape(format!(
                "{} values do not form rows of width {dim}",
                points.len()
            )));
        }
        Ok(Self { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn clear(&mut self) {
        self.points.clear();
    }

    pub fn push(&mut self, point: &[f64]) {
        debug_assert_eq!(point.len(), self.dim);
        self.points.extend_from_slice(point);
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// The `k` smallest distances from `query`, ascending. `exclude` skips
    /// one stored point (the query itself when it is part of the index).
    /// Returns every available distance when fewer than `k` exist.
    pub fn knn_distances(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Result<Vec<f64>> {
        if query.len() != self.dim {
            return Err(Error::shape(format!(
                "query width {} != index width {}",
                query.len(),
                self.dim
            )));
        }
        let mut d: Vec<f64> = (0..self.len())
            .filter(|&i| Some(i) != exclude)
            .map(|i| euclidean(query, self.point(i)))
            .collect();
        if d.is_empty() {
            return Err(Error::State("k-NN query against an empty index".into()));
        }
        let k = k.min(d.len());
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d.truncate(k);
        }
        d.sort_by(f64::total_cmp);
        Ok(d)
    }
}
