//! Distribution-free bounds on the probability that a fresh sample falls on
//! either side of an empirical threshold.
//!
//! Both bounds come from the Dvoretzky–Kiefer–Wolfowitz inequality
//! `P(sup |F_n - F| > eps) <= 2 exp(-2 n eps^2)`:
//!
//! ```text
//! rho(a, d) = sup_{eps in (0,1]} max(a - eps, 0) * (1 - 2 exp(-2 d eps^2))
//! psi(a, d) = inf_{eps in (0,1]} 2 exp(-2 d eps^2) + min(1, a + eps)
//! ```
//!
//! If `a = F_n(theta)` then `rho(a, n) <= P(z <= theta) <= psi(a, n)` for a new
//! independent draw `z`. The objectives are not concave, so the optimum is
//! bracketed on a coarse grid and then refined by golden-section search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of coarse grid points over the epsilon domain. Spacing is below 5e-4.
pub const EPS_GRID_POINTS: usize = 2049;
/// Left end of the epsilon domain standing in for the open endpoint 0.
pub const EPS_MIN: f64 = 1e-12;
/// Absolute bracket width at which golden-section refinement stops.
pub const EPS_TOL: f64 = 1e-10;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// `min{1, 2 exp(-2 n eps^2)}`, the DKW bound on the probability that the
/// empirical CDF of `n` samples deviates from the true CDF by more than `eps`.
pub fn dkw_failure(epsilon: f64, n: u64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} outside (0,1]"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample count must be positive".into(),
        ));
    }
    Ok((2.0 * (-2.0 * n as f64 * epsilon * epsilon).exp()).min(1.0))
}

fn check_args(a: f64, d: u64) -> Result<()> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidArgument(format!(
            "probability {a} outside [0,1]"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument(
            "sample count must be positive".into(),
        ));
    }
    Ok(())
}

/// Maximizes `f` over `[lo, hi]`: coarse grid, then golden-section search on
/// the two cells around the best grid point.
fn grid_golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let step = (hi - lo) / (EPS_GRID_POINTS - 1) as f64;
    let at = |i: usize| {
        if i == EPS_GRID_POINTS - 1 {
            hi
        } else {
            lo + step * i as f64
        }
    };

    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..EPS_GRID_POINTS {
        let v = f(at(i));
        if v > best {
            best = v;
            best_i = i;
        }
    }

    let mut a = at(best_i.saturating_sub(1));
    let mut b = at((best_i + 1).min(EPS_GRID_POINTS - 1));
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > EPS_TOL {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    best.max(f1).max(f2).max(f(0.5 * (a + b)))
}

/// Lower bound on `P(z <= theta)` given `a = F_n(theta)` from `d` samples.
///
/// The result lies in `[0, a]`.
pub fn rho(a: f64, d: u64) -> Result<f64> {
    check_args(a, d)?;
    if a == 0.0 {
        return Ok(0.0);
    }
    let n = d as f64;
    let objective = |eps: f64| (a - eps).max(0.0) * (1.0 - 2.0 * (-2.0 * n * eps * eps).exp());
    let value = grid_golden_max(objective, EPS_MIN, 1.0);
    if !value.is_finite() {
        return Err(Error::Numerical(format!("rho({a}, {d}) not finite")));
    }
    Ok(value.clamp(0.0, a))
}

/// Upper bound on `P(z <= theta)` given `a = F_n(theta)` from `d` samples.
///
/// Always `>= a`, and may exceed 1.
pub fn psi(a: f64, d: u64) -> Result<f64> {
    check_args(a, d)?;
    let n = d as f64;
    let objective = |eps: f64| -(2.0 * (-2.0 * n * eps * eps).exp() + (a + eps).min(1.0));
    let value = -grid_golden_max(objective, EPS_MIN, 1.0);
    if !value.is_finite() {
        return Err(Error::Numerical(format!("psi({a}, {d}) not finite")));
    }
    Ok(value.max(a))
}

/// Two-sided bound on a probability, with and without clamping to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub lower: f64,
    pub upper: f64,
    pub raw_lower: f64,
    pub raw_upper: f64,
}

impl BoundPair {
    fn from_raw(raw_lower: f64, raw_upper: f64) -> Self {
        Self {
            lower: raw_lower.clamp(0.0, 1.0),
            upper: raw_upper.clamp(0.0, 1.0),
            raw_lower,
            raw_upper,
        }
    }

    /// The clamped lower bound carries no information.
    pub fn is_vacuous(&self) -> bool {
        self.lower <= 0.0
    }
}

/// Bounds on `P(z <= theta)` (first) and `P(z > theta)` (second) for a fresh
/// draw, given `f_at_theta = F_n(theta)` over `n` samples.
pub fn lemma_event_bounds(f_at_theta: f64, n: u64) -> Result<(BoundPair, BoundPair)> {
    let lo = rho(f_at_theta, n)?;
    let hi = psi(f_at_theta, n)?;
    Ok((
        BoundPair::from_raw(lo, hi),
        BoundPair::from_raw(1.0 - hi, 1.0 - lo),
    ))
}

/// Per-class guarantees attached to a fitted corrector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassBounds {
    /// Lower bound on accepting a correct decision, clamped at 0.
    pub upsilon: f64,
    /// `1 - psi(F_+(theta), M_+)` before clamping.
    pub upsilon_raw: f64,
    /// Lower bound on rejecting an incorrect decision.
    pub gamma: f64,
    pub delta: f64,
    pub m_plus: u64,
    pub m_minus: u64,
}

impl ClassBounds {
    pub fn compute(delta: f64, f_plus_at_theta: f64, m_plus: u64, m_minus: u64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta {delta} outside (0,1)"
            )));
        }
        let gamma = rho(delta, m_minus)?;
        let upsilon_raw = 1.0 - psi(f_plus_at_theta, m_plus)?;
        Ok(Self {
            upsilon: upsilon_raw.clamp(0.0, 1.0),
            upsilon_raw,
            gamma,
            delta,
            m_plus,
            m_minus,
        })
    }

    pub fn upsilon_vacuous(&self) -> bool {
        self.upsilon <= 0.0
    }

    pub fn gamma_vacuous(&self) -> bool {
        self.gamma <= 0.0
    }
}

/// Class-independent bounds obtained by weighting per-class bounds with label priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapsedBounds {
    /// `sum_j P(l_j) * upsilon_j`.
    pub accept_lb: f64,
    /// `sum_j (1 - P(l_j)) * gamma_j`, clamped to 1.
    pub reject_lb: f64,
    pub reject_lb_raw: f64,
}

pub fn collapse_bounds(priors: &[f64], per_class: &[ClassBounds]) -> Result<CollapsedBounds> {
    if priors.is_empty() || priors.len() != per_class.len() {
        return Err(Error::InvalidArgument(format!(
            "{} priors for {} classes",
            priors.len(),
            per_class.len()
        )));
    }
    if priors.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument("prior outside [0,1]".into()));
    }
    let total: f64 = priors.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("priors sum to {total}")));
    }
    let accept_lb = priors
        .iter()
        .zip(per_class)
        .map(|(p, b)| p * b.upsilon)
        .sum();
    let reject_lb_raw: f64 = priors
        .iter()
        .zip(per_class)
        .map(|(p, b)| (1.0 - p) * b.gamma)
        .sum();
    Ok(CollapsedBounds {
        accept_lb,
        reject_lb: reject_lb_raw.min(1.0),
        reject_lb_raw,
    })
}

/// One point of a rejection-bound curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub delta: f64,
    pub m: u64,
    pub gamma: f64,
}

/// `rho(delta, m)` over an increasing sequence of error-set sizes.
pub fn bound_curve(delta: f64, m_values: &[u64]) -> Result<Vec<CurvePoint>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta {delta} outside (0,1)"
        )));
    }
    if m_values.is_empty() {
        return Err(Error::InvalidArgument("empty m grid".into()));
    }
    if m_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "m grid must be strictly increasing".into(),
        ));
    }
    m_values
        .iter()
        .map(|&m| {
            Ok(CurvePoint {
                delta,
                m,
                gamma: rho(delta, m)?,
            })
        })
        .collect()
}

/// Integer grid of `points` values log-spaced between `m_min` and `m_max`,
/// with duplicates from rounding removed.
pub fn log_spaced_counts(m_min: u64, m_max: u64, points: usize) -> Result<Vec<u64>> {
    if m_min == 0 || m_max < m_min || points == 0 {
        return Err(Error::InvalidArgument(format!(
            "bad grid: m_min={m_min}, m_max={m_max}, points={points}"
        )));
    }
    if points == 1 {
        return Ok(vec![m_min]);
    }
    let (lo, hi) = ((m_min as f64).ln(), (m_max as f64).ln());
    let mut out: Vec<u64> = (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            ((lo + t * (hi - lo)).exp().round() as u64).clamp(m_min, m_max)
        })
        .collect();
    out.dedup();
    Ok(out)
}

/// Smallest `delta` in `(0, 1)` with `rho(delta, m_minus) >= target`, or
/// `None` if no such `delta` exists.
pub fn delta_for_gamma(target: f64, m_minus: u64) -> Result<Option<f64>> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma target {target} outside (0,1)"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0 - 1e-12;
    if rho(hi, m_minus)? < target {
        return Ok(None);
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if rho(mid, m_minus)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}
