//! Arm selection over intrinsic reward modules.
//!
//! Each arm keeps a FIFO window of the mean estimated task return observed
//! after it was used; its value `Q` is the window mean. Selection is UCB with
//! the update counter as time index, or Thompson sampling.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Ucb,
    Thompson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditConfig {
    pub c: f64,
    pub window: usize,
    pub strategy: Strategy,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            c: 0.1,
            window: 10,
            strategy: Strategy::Ucb,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bandit {
    arms: Vec<String>,
    q: Vec<f64>,
    n: Vec<u64>,
    windows: Vec<VecDeque<f64>>,
    capacity: usize,
    c: f64,
    k: u64,
}

impl Bandit {
    pub fn new<S: Into<String>>(arms: impl IntoIterator<Item = S>, c: f64, window: usize) -> Result<Self> {
        let arms: Vec<String> = arms.into_iter().map(Into::into).collect();
        if arms.is_empty() {
            return Err(Error::config("bandit.arms", "at least one arm is required"));
        }
        for (i, a) in arms.iter().enumerate() {
            if arms[..i].contains(a) {
                return Err(Error::config("bandit.arms", format!("duplicate arm '{a}'")));
            }
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::config("bandit.c", "must be finite and >= 0"));
        }
        if window == 0 {
            return Err(Error::config("bandit.window", "must be at least 1"));
        }
        let n_arms = arms.len();
        Ok(Self {
            arms,
            q: vec![0.0; n_arms],
            n: vec![1; n_arms],
            windows: vec![VecDeque::with_capacity(window); n_arms],
            capacity: window,
            c,
            k: 1,
        })
    }

    pub fn from_config<S: Into<String>>(arms: impl IntoIterator<Item = S>, cfg: &BanditConfig) -> Result<Self> {
        Self::new(arms, cfg.c, cfg.window)
    }

    pub fn arms(&self) -> &[String] {
        &self.arms
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn counts(&self) -> &[u64] {
        &self.n
    }

    pub fn window(&self, arm: usize) -> &VecDeque<f64> {
        &self.windows[arm]
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Update counter used as the UCB time index; starts at 1.
    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn arm_index(&self, name: &str) -> Result<usize> {
        self.arms
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| Error::NotFound(format!("no arm named '{name}'")))
    }

    /// `Q + c * sqrt(ln k / N)` per arm.
    pub fn scores(&self) -> Vec<f64> {
        let ln_k = (self.k as f64).ln();
        self.q
            .iter()
            .zip(&self.n)
            .map(|(q, &n)| q + self.c * (ln_k / n as f64).sqrt())
            .collect()
    }

    /// UCB choice; ties go to the lowest index.
    pub fn select(&self) -> usize {
        argmax(&self.scores())
    }

    /// Sample `N(Q, 1/sqrt(N))` per arm and take the argmax.
    pub fn thompson_select(&self, rng: &mut Rng) -> usize {
        let draws: Vec<f64> = self
            .q
            .iter()
            .zip(&self.n)
            .map(|(q, &n)| q + rng.normal() / (n as f64).sqrt())
            .collect();
        argmax(&draws)
    }

    pub fn select_with(&self, strategy: Strategy, rng: &mut Rng) -> usize {
        match strategy {
            Strategy::Ucb => self.select(),
            Strategy::Thompson => self.thompson_select(rng),
        }
    }

    pub fn record(&mut self, arm: &str, mean_return: f64) -> Result<()> {
        let i = self.arm_index(arm)?;
        self.record_index(i, mean_return)
    }

    pub fn record_index(&mut self, arm: usize, mean_return: f64) -> Result<()> {
        if arm >= self.arms.len() {
            return Err(Error::NotFound(format!("no arm with index {arm}")));
        }
        if !mean_return.is_finite() {
            return Err(Error::Numeric(format!("non-finite return {mean_return} for arm {}", self.arms[arm])));
        }
        let w = &mut self.windows[arm];
        if w.len() == self.capacity {
            w.pop_front();
        }
        w.push_back(mean_return);
        self.q[arm] = w.iter().sum::<f64>() / w.len() as f64;
        self.n[arm] += 1;
        self.k += 1;
        Ok(())
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// One row of the per-update selection log.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub update: u64,
    pub arm: String,
    pub q: Vec<f64>,
    pub n: Vec<u64>,
    pub beta: f64,
}

impl SelectionRow {
    /// Snapshot after `record` for the given update.
    pub fn snapshot(bandit: &Bandit, update: u64, arm: usize, beta: f64) -> Self {
        Self {
            update,
            arm: bandit.arms[arm].clone(),
            q: bandit.q.clone(),
            n: bandit.n.clone(),
            beta,
        }
    }
}

/// CSV writer with columns `update, arm, q_<arm>..., n_<arm>..., beta`.
pub struct SelectionLog<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> SelectionLog<W> {
    pub fn new(inner: W, arms: &[String]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        let mut header = vec!["update".to_string(), "arm".to_string()];
        header.extend(arms.iter().map(|a| format!("q_{a}")));
        header.extend(arms.iter().map(|a| format!("n_{a}")));
        header.push("beta".into());
        writer.write_record(&header)?;
        Ok(Self { writer })
    }

    pub fn write(&mut self, row: &SelectionRow) -> Result<()> {
        let mut rec = vec![row.update.to_string(), row.arm.clone()];
        rec.extend(row.q.iter().map(|q| q.to_string()));
        rec.extend(row.n.iter().map(|n| n.to_string()));
        rec.push(row.beta.to_string());
        self.writer.write_record(&rec)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_tie_goes_to_first_arm() {
        let b = Bandit::new(["id", "re3"], 0.1, 10).unwrap();
        assert_eq!(b.select(), 0);
    }

    #[test]
    fn hand_scored_example() {
        let mut b = Bandit::new(["id", "re3"], 0.1, 10).unwrap();
        b.q = vec![0.8, 0.6];
        b.n = vec![3, 1];
        b.k = 4;
        let s = b.scores();
        assert!((s[0] - (0.8 + 0.1 * (4f64.ln() / 3.0).sqrt())).abs() < 1e-15);
        assert!((s[0] - 0.867_97).abs() < 1e-5);
        assert!((s[1] - 0.717_74).abs() < 1e-5);
        assert_eq!(b.select(), 0);
    }

    #[test]
    fn zero_c_is_greedy() {
        let mut b = Bandit::new(["a", "b", "c"], 0.0, 4).unwrap();
        b.record("b", 0.5).unwrap();
        b.record("c", 0.2).unwrap();
        assert_eq!(b.select(), 1);
    }

    #[test]
    fn window_is_fifo() {
        let mut b = Bandit::new(["a"], 0.1, 3).unwrap();
        for v in [1.0, 2.0, 3.0, 4.0] {
            b.record("a", v).unwrap();
        }
        assert_eq!(b.window(0).iter().copied().collect::<Vec<_>>(), vec![2.0, 3.0, 4.0]);
        assert_eq!(b.q()[0], 3.0);
        assert_eq!(b.counts()[0], 5);
        assert_eq!(b.k(), 5);
    }

    #[test]
    fn single_push() {
        let mut b = Bandit::new(["a", "b"], 0.1, 3).unwrap();
        b.record("b", 0.25).unwrap();
        assert_eq!(b.q(), &[0.0, 0.25]);
        assert_eq!(b.counts(), &[1, 2]);
    }

    #[test]
    fn unknown_arm_is_not_found() {
        let mut b = Bandit::new(["a"], 0.1, 3).unwrap();
        assert!(matches!(b.record("z", 1.0), Err(Error::NotFound(_))));
        assert!(matches!(b.record_index(3, 1.0), Err(Error::NotFound(_))));
    }

    #[test]
    fn invalid_construction() {
        assert!(Bandit::new(Vec::<String>::new(), 0.1, 3).is_err());
        assert!(Bandit::new(["a", "a"], 0.1, 3).is_err());
        assert!(Bandit::new(["a"], -1.0, 3).is_err());
        assert!(Bandit::new(["a"], 0.1, 0).is_err());
    }

    #[test]
    fn thompson_single_arm() {
        let b = Bandit::new(["only"], 0.1, 3).unwrap();
        let mut rng = Rng::new(0, 0);
        assert!((0..100).all(|_| b.thompson_select(&mut rng) == 0));
    }

    #[test]
    fn log_has_expected_columns() {
        let mut b = Bandit::new(["id", "re3"], 0.1, 3).unwrap();
        let mut buf = Vec::new();
        {
            let mut log = SelectionLog::new(&mut buf, b.arms()).unwrap();
            b.record_index(1, 0.5).unwrap();
            log.write(&SelectionRow::snapshot(&b, 1, 1, 0.1)).unwrap();
            log.flush().unwrap();
        }
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "update,arm,q_id,q_re3,n_id,n_re3,beta");
        assert_eq!(lines.next().unwrap(), "1,re3,0,0.5,1,2,0.1");
    }
}
