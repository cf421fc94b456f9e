//! Monte Carlo summaries.

use serde::{Deserialize, Serialize};

/// Mean and standard error of a per-trial quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloStats {
    pub trials: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(trials)`; zero for a single trial.
    pub std_error: f64,
    pub seed: u64,
}

impl MonteCarloStats {
    /// Summarizes per-trial values, which must be supplied in trial order so
    /// that the floating-point result does not depend on scheduling.
    pub fn from_values(values: &[f64], seed: u64) -> Self {
        let mut acc = Accumulator::default();
        for &v in values {
            acc.push(v);
        }
        acc.finish(seed)
    }

    /// True if `value` lies within `k` standard errors of the mean.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }
}

/// Monte Carlo summary checked against an upper bound, allowing `k_sigma`
/// standard errors of sampling slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundedStats {
    #[serde(flatten)]
    pub stats: MonteCarloStats,
    pub bound: f64,
    pub bound_satisfied: bool,
}

impl BoundedStats {
    pub fn check(stats: MonteCarloStats, bound: f64, k_sigma: f64) -> Self {
        BoundedStats {
            stats,
            bound,
            bound_satisfied: stats.mean <= bound + k_sigma * stats.std_error,
        }
    }

    pub const CSV_HEADER: &'static str = "mean,std_error,trials,seed,bound,bound_satisfied";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.stats.mean,
            self.stats.std_error,
            self.stats.trials,
            self.stats.seed,
            self.bound,
            self.bound_satisfied
        )
    }
}

/// Welford accumulator with a parallel merge (Chan et al.).
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn finish(&self, seed: u64) -> MonteCarloStats {
        let std_error = if self.count == 0 {
            0.0
        } else {
            (self.sample_variance() / self.count as f64).sqrt()
        };
        MonteCarloStats {
            trials: self.count,
            mean: self.mean,
            std_error,
            seed,
        }
    }
}
