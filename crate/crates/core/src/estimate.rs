//! Monte Carlo proportions with Wilson score intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Success counter; merging is associative and commutative, so replicate
/// results can be reduced in any order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub successes: u64,
    pub reps: u64,
}

impl Tally {
    pub fn record(&mut self, hit: bool) {
        self.successes += hit as u64;
        self.reps += 1;
    }

    pub fn merge(self, other: Tally) -> Tally {
        Tally {
            successes: self.successes + other.successes,
            reps: self.reps + other.reps,
        }
    }

    pub fn from_hits(hits: impl IntoIterator<Item = bool>) -> Tally {
        hits.into_iter().fold(Tally::default(), |mut t, h| {
            t.record(h);
            t
        })
    }

    pub fn estimate(&self, level: f64) -> EstimateWithCI {
        EstimateWithCI::wilson(self.successes, self.reps, level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Wilson,
    /// Two-sided Wilson bounds each taken at the one-sided level.
    WilsonOneSided,
    /// Interval arithmetic on the bounds of monotone transforms of
    /// Wilson intervals (products, powers).
    Propagated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub reps: u64,
    pub level: f64,
    pub method: CiMethod,
}

/// Standard normal quantile for a two-sided interval at `level`.
pub fn z_two_sided(level: f64) -> f64 {
    normal_quantile(0.5 + level / 2.0)
}

/// Standard normal quantile for a one-sided bound at `level`.
pub fn z_one_sided(level: f64) -> f64 {
    normal_quantile(level)
}

fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(p)
}

impl EstimateWithCI {
    /// Two-sided Wilson score interval at confidence `level`.
    pub fn wilson(successes: u64, reps: u64, level: f64) -> Self {
        let (lo, hi) = wilson_bounds(successes, reps, z_two_sided(level));
        EstimateWithCI {
            point: proportion(successes, reps),
            ci_low: lo,
            ci_high: hi,
            reps,
            level,
            method: CiMethod::Wilson,
        }
    }

    /// Wilson bounds where each side is a one-sided bound at `level`.
    pub fn wilson_one_sided(successes: u64, reps: u64, level: f64) -> Self {
        let (lo, hi) = wilson_bounds(successes, reps, z_one_sided(level));
        EstimateWithCI {
            point: proportion(successes, reps),
            ci_low: lo,
            ci_high: hi,
            reps,
            level,
            method: CiMethod::WilsonOneSided,
        }
    }

    pub fn exact(value: f64, reps: u64) -> Self {
        EstimateWithCI {
            point: value,
            ci_low: value,
            ci_high: value,
            reps,
            level: 1.0,
            method: CiMethod::Propagated,
        }
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    pub fn overlaps(&self, other: &EstimateWithCI) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }

    /// Product of two nonnegative estimates; bounds multiply.
    pub fn product(&self, other: &EstimateWithCI) -> EstimateWithCI {
        EstimateWithCI {
            point: self.point * other.point,
            ci_low: self.ci_low * other.ci_low,
            ci_high: self.ci_high * other.ci_high,
            reps: self.reps.min(other.reps),
            level: self.level.min(other.level),
            method: CiMethod::Propagated,
        }
    }

    /// `x ↦ x^e` for `e > 0`, monotone on `[0, 1]`.
    pub fn powf(&self, e: f64) -> EstimateWithCI {
        EstimateWithCI {
            point: self.point.powf(e),
            ci_low: self.ci_low.powf(e),
            ci_high: self.ci_high.powf(e),
            reps: self.reps,
            level: self.level,
            method: CiMethod::Propagated,
        }
    }
}

fn proportion(successes: u64, reps: u64) -> f64 {
    if reps == 0 {
        0.0
    } else {
        successes as f64 / reps as f64
    }
}

/// Wilson score bounds, clamped to `[0, 1]` and to contain the point.
pub fn wilson_bounds(successes: u64, reps: u64, z: f64) -> (f64, f64) {
    if reps == 0 {
        return (0.0, 1.0);
    }
    let n = reps as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).clamp(0.0, p)
    };
    let hi = if successes == reps {
        1.0
    } else {
        (center + half).clamp(p, 1.0)
    };
    (lo, hi)
}
