//! Piecewise-linear over-approximation of `y²` on `[-ȳ, ȳ]` with Λ equal segments.
//!
//! The approximation splits `y = y⁺ − y⁻`, spreads `y⁺ + y⁻` over Λ segment fills
//! `Δ_λ ∈ [0, ȳ/Λ]` and prices segment λ at slope `(2λ − 1)·ȳ/Λ`. Filling the
//! segments in order (the canonical decomposition) reproduces the chord
//! interpolant of `y²` through the breakpoints `k·ȳ/Λ`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative slack beyond the bound that is clamped instead of rejected.
pub const CLAMP_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PwlError {
    #[error("segment count must be at least 1")]
    ZeroSegments,
    #[error("bound must be positive and finite, got {0}")]
    BadBound(f64),
    #[error("|y| = {y} exceeds the approximation bound {bound}")]
    OutOfRange { y: f64, bound: f64 },
    #[error("target value {target} is not attainable for y = {y} under bound {bound}")]
    Unattainable { y: f64, target: f64, bound: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PwlSpec {
    lambda: u32,
    bound: f64,
}

impl PwlSpec {
    pub fn new(lambda: u32, bound: f64) -> Result<Self, PwlError> {
        if lambda == 0 {
            return Err(PwlError::ZeroSegments);
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(PwlError::BadBound(bound));
        }
        Ok(PwlSpec { lambda, bound })
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn segment_width(&self) -> f64 {
        self.bound / self.lambda as f64
    }

    /// Slope of segment `k` (1-based).
    pub fn slope(&self, k: u32) -> f64 {
        (2 * k - 1) as f64 * self.bound / self.lambda as f64
    }

    pub fn slopes(&self) -> Vec<f64> {
        (1..=self.lambda).map(|k| self.slope(k)).collect()
    }
}

/// One feasible split of `y` into the approximation's auxiliary variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwlDecomposition {
    pub y_plus: f64,
    pub y_minus: f64,
    pub deltas: Vec<f64>,
    pub value: f64,
}

impl PwlDecomposition {
    pub fn fill(&self) -> f64 {
        self.deltas.iter().sum()
    }
}

pub fn pwl_slopes(spec: &PwlSpec) -> Vec<f64> {
    spec.slopes()
}

/// Greedy segment fills for a total fill `t ∈ [0, ȳ]`.
fn greedy_deltas(spec: &PwlSpec, t: f64) -> Vec<f64> {
    let w = spec.segment_width();
    let mut rest = t;
    (0..spec.lambda)
        .map(|_| {
            let d = rest.min(w).max(0.0);
            rest -= d;
            d
        })
        .collect()
}

fn value_of(spec: &PwlSpec, deltas: &[f64]) -> f64 {
    deltas.iter().enumerate().map(|(k, d)| spec.slope(k as u32 + 1) * d).sum()
}

fn clamp_magnitude(y: f64, spec: &PwlSpec) -> Result<f64, PwlError> {
    let m = y.abs();
    if !m.is_finite() || m > spec.bound * (1.0 + CLAMP_SLACK) {
        return Err(PwlError::OutOfRange { y, bound: spec.bound });
    }
    if m > spec.bound {
        log::warn!("clamping |y| = {m} to bound {}", spec.bound);
    }
    Ok(m.min(spec.bound))
}

/// Canonical (greedy-fill) evaluation of `f(y, ȳ, Λ)` with the decomposition attaining it.
pub fn pwl_eval(y: f64, spec: &PwlSpec) -> Result<(f64, PwlDecomposition), PwlError> {
    let m = clamp_magnitude(y, spec)?;
    let deltas = greedy_deltas(spec, m);
    let value = value_of(spec, &deltas);
    let (y_plus, y_minus) = if y >= 0.0 { (m, 0.0) } else { (0.0, m) };
    Ok((value, PwlDecomposition { y_plus, y_minus, deltas, value }))
}

/// Canonical value only.
pub fn pwl_value(y: f64, spec: &PwlSpec) -> Result<f64, PwlError> {
    pwl_eval(y, spec).map(|(v, _)| v)
}

/// Largest over-estimate `f(y) − y²` on `[-ȳ, ȳ]`, reached at segment midpoints.
pub fn pwl_max_gap(spec: &PwlSpec) -> f64 {
    let w = spec.segment_width();
    w * w / 4.0
}

/// Decomposition of `y` whose value equals `target`, filling segments in order.
///
/// Any `target` between the canonical value of `y` and `ȳ²` is reachable by
/// letting `y⁺` and `y⁻` overlap: the total fill `t` solves `f(t) = target` and the
/// split is `y± = (t ± y)/2`. `target` within `tol` outside that interval is snapped
/// to the nearest end.
pub fn decompose_to_value(y: f64, target: f64, spec: &PwlSpec, tol: f64) -> Result<PwlDecomposition, PwlError> {
    let m = clamp_magnitude(y, spec)?;
    let lo = value_of(spec, &greedy_deltas(spec, m));
    let hi = spec.bound * spec.bound;
    if target < lo - tol || target > hi + tol {
        return Err(PwlError::Unattainable { y, target, bound: spec.bound });
    }
    let target = target.clamp(lo, hi);
    let w = spec.segment_width();
    // Breakpoint values are k²w²; locate the segment holding the target.
    let mut k = ((target.sqrt() / w).floor() as u32).min(spec.lambda);
    while k > 0 && (k as f64 * w).powi(2) > target {
        k -= 1;
    }
    let t = if k >= spec.lambda {
        spec.bound
    } else {
        let base = (k as f64 * w).powi(2);
        (k as f64 * w + (target - base) / spec.slope(k + 1)).min(spec.bound)
    };
    let t = t.max(m);
    let signed = if y >= 0.0 { m } else { -m };
    let deltas = greedy_deltas(spec, t);
    let value = value_of(spec, &deltas);
    Ok(PwlDecomposition { y_plus: (t + signed) / 2.0, y_minus: (t - signed) / 2.0, deltas, value })
}
