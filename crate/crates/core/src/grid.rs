use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[-r, T]` with `T = m r` and `n` steps per delay interval.
///
/// Node `k` sits at time `(k - n) * delta`; node `n` is time zero. Paths on
/// the forward window `[0, T]` are indexed from zero at time zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    delay: f64,
    horizon: f64,
    steps_per_delay: usize,
    intervals: usize,
    delta: f64,
}

impl TimeGrid {
    pub fn new(delay: f64, horizon: f64, steps_per_delay: usize) -> Result<Self> {
        if !(delay.is_finite() && delay > 0.0) {
            return Err(Error::param("delay", format!("must be > 0, got {delay}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param("horizon", format!("must be > 0, got {horizon}")));
        }
        if steps_per_delay == 0 {
            return Err(Error::param("steps_per_delay", "must be >= 1"));
        }
        let ratio = horizon / delay;
        let intervals = ratio.round();
        if intervals < 1.0 || (ratio - intervals).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::param(
                "horizon",
                format!("must be an integer multiple of the delay {delay}, got {horizon}"),
            ));
        }
        Ok(Self {
            delay,
            horizon,
            steps_per_delay,
            intervals: intervals as usize,
            delta: delay / steps_per_delay as f64,
        })
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps_per_delay(&self) -> usize {
        self.steps_per_delay
    }

    /// Number `m` of delay intervals in `[0, T]`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Node count on `[-r, T]`: `(m + 1) n + 1`.
    pub fn len(&self) -> usize {
        (self.intervals + 1) * self.steps_per_delay + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Full-grid index of time zero.
    pub fn zero_index(&self) -> usize {
        self.steps_per_delay
    }

    /// Node count on `[0, T]`.
    pub fn forward_len(&self) -> usize {
        self.intervals * self.steps_per_delay + 1
    }

    /// Time of full-grid node `k`.
    pub fn time(&self, k: usize) -> f64 {
        (k as f64 - self.steps_per_delay as f64) * self.delta
    }

    /// Time of forward node `k` (node 0 is time zero).
    pub fn forward_time(&self, k: usize) -> f64 {
        k as f64 * self.delta
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn forward_times(&self) -> Vec<f64> {
        (0..self.forward_len()).map(|k| self.forward_time(k)).collect()
    }

    /// Forward index of `t` if `t` lies on a node of `[0, T]`.
    pub fn forward_index(&self, t: f64) -> Option<usize> {
        if !t.is_finite() || t < -1e-12 {
            return None;
        }
        let k = (t / self.delta).round();
        if (k * self.delta - t).abs() > 1e-9 * self.delta.max(t.abs()) {
            return None;
        }
        let k = k as usize;
        (k < self.forward_len()).then_some(k)
    }

    /// Same grid restricted or extended to `intervals` delay intervals.
    pub fn with_intervals(&self, intervals: usize) -> Result<Self> {
        TimeGrid::new(self.delay, self.delay * intervals as f64, self.steps_per_delay)
    }
}
