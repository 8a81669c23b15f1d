use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    /// `x / std`; keeps the sign of non-negative bonuses.
    #[default]
    Scale,
    /// `(x - mean) / std`.
    Center,
}

const MIN_STD: f64 = 1e-8;

/// Streaming mean and population variance (Welford).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunningNormalizer {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningNormalizer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, values: &[f64]) {
        for &x in values {
            self.count += 1;
            let delta = x - self.mean;
            self.mean += delta / self.count as f64;
            self.m2 += delta * (x - self.mean);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Normalise with the current statistics. A degenerate spread leaves the
    /// scale untouched.
    pub fn normalize(&self, x: f64, mode: NormalizeMode) -> f64 {
        let std = self.std();
        let centered = match mode {
            NormalizeMode::Scale => x,
            NormalizeMode::Center => x - self.mean,
        };
        if std > MIN_STD {
            centered / std
        } else {
            centered
        }
    }

    /// Fold `values` into the statistics, then normalise them.
    pub fn update_and_normalize(&mut self, values: &[f64], mode: NormalizeMode) -> Vec<f64> {
        self.update(values);
        values.iter().map(|&x| self.normalize(x, mode)).collect()
    }
}
