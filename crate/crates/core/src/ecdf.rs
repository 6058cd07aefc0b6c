//! Empirical cumulative distribution functions over 1-D score multisets.
//!
//! `F_n(s) = #{x <= s} / n` is right-continuous, and the pseudo-inverse
//! `F_n^+(y) = inf{x : F_n(x) >= y}` always returns one of the stored samples
//! (the `ceil(y * n)`-th order statistic).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack, in machine epsilons, used when snapping `y * n` to an integer.
const RANK_SNAP_EPS: f64 = 4.0 * f64::EPSILON;

/// Sorted multiset of finite scores. Duplicates are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    values: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        Self::from_vec(samples.to_vec())
    }

    pub fn from_vec(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteScore);
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; an `EmpiricalCdf` holds at least one sample.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Number of stored values `<= s`.
    pub fn count_le(&self, s: f64) -> usize {
        self.values.partition_point(|&v| v <= s)
    }

    /// `F_n(s)`.
    pub fn evaluate(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::NonFinite("cdf query point"));
        }
        Ok(self.count_le(s) as f64 / self.values.len() as f64)
    }

    /// 1-based rank `ceil(y * n)`, snapping to the nearest integer when `y * n`
    /// lies within a few ulps of it so that levels like `3/4` map to rank 3.
    fn rank(&self, y: f64) -> usize {
        let n = self.values.len();
        let t = y * n as f64;
        let nearest = t.round();
        let r = if (t - nearest).abs() <= RANK_SNAP_EPS * t.abs().max(1.0) {
            nearest
        } else {
            t.ceil()
        };
        (r as usize).clamp(1, n)
    }

    /// `F_n^+(y)`, the smallest stored score `x` with `F_n(x) >= y`.
    pub fn pseudo_inverse(&self, y: f64) -> Result<f64> {
        if !(y > 0.0 && y <= 1.0) {
            return Err(Error::QuantileLevel(y));
        }
        Ok(self.values[self.rank(y) - 1])
    }
}
