//! Relative PWL approximation errors of the squared feeder flows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::FeederBounds;
use crate::network::Network;
use crate::pwl::{pwl_value, PwlError, PwlSpec};
use crate::solver::Solution;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("error indices need a feasible solution")]
    NoSolution,
    #[error("feeder {feeder}: {source}")]
    Pwl { feeder: String, source: PwlError },
}

/// Error indices of one in-use feeder, percent. `None` marks a flow excluded for a
/// near-zero denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederError {
    pub id: String,
    pub e_p: Option<f64>,
    pub e_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorIndices {
    pub in_use: Vec<String>,
    pub per_feeder: Vec<FeederError>,
    pub e_p_mean: f64,
    pub e_q_mean: f64,
    pub e_p_max: f64,
    pub e_q_max: f64,
    pub excluded_p: Vec<String>,
    pub excluded_q: Vec<String>,
    /// Set when no feeder contributed to a mean; the means are then reported as zero.
    pub empty: bool,
    /// Largest excess of the solver's filled PWL value over the canonical one (pu²).
    pub achieved_f_gap: f64,
}

/// Relative error `|f(y) − y²| / y²` in percent, or `None` below the floor.
pub fn relative_error(y: f64, spec: &PwlSpec, denom_floor: f64) -> Result<Option<f64>, PwlError> {
    let sq = y * y;
    if sq < denom_floor || sq == 0.0 {
        return Ok(None);
    }
    let f = pwl_value(y, spec)?;
    Ok(Some((f - sq).abs() / sq * 100.0))
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Error indices over the feeders energized in `sol`, using the canonical PWL value
/// under `bounds`.
pub fn error_indices(
    net: &Network,
    sol: &Solution,
    bounds: &FeederBounds,
    lambda: u32,
    denom_floor: f64,
) -> Result<ErrorIndices, MetricsError> {
    if !sol.status.is_feasible() || !sol.has_point() {
        return Err(MetricsError::NoSolution);
    }
    let mut out = ErrorIndices {
        in_use: Vec::new(),
        per_feeder: Vec::new(),
        e_p_mean: 0.0,
        e_q_mean: 0.0,
        e_p_max: 0.0,
        e_q_max: 0.0,
        excluded_p: Vec::new(),
        excluded_q: Vec::new(),
        empty: false,
        achieved_f_gap: 0.0,
    };
    let (mut ps, mut qs) = (Vec::new(), Vec::new());
    for (k, f) in net.feeders.iter().enumerate().filter(|(k, _)| sol.w[*k]) {
        let wrap = |source| MetricsError::Pwl { feeder: f.id.clone(), source };
        let pspec = PwlSpec::new(lambda, bounds.p_max[k]).map_err(wrap)?;
        let qspec = PwlSpec::new(lambda, bounds.q_max[k]).map_err(wrap)?;
        let e_p = relative_error(sol.p_flow[k], &pspec, denom_floor).map_err(wrap)?;
        let e_q = relative_error(sol.q_flow[k], &qspec, denom_floor).map_err(wrap)?;
        let canon_p = pwl_value(sol.p_flow[k], &pspec).map_err(wrap)?;
        let canon_q = pwl_value(sol.q_flow[k], &qspec).map_err(wrap)?;
        out.achieved_f_gap = out.achieved_f_gap.max(sol.p_pwl[k] - canon_p).max(sol.q_pwl[k] - canon_q);
        match e_p {
            Some(e) => ps.push(e),
            None => out.excluded_p.push(f.id.clone()),
        }
        match e_q {
            Some(e) => qs.push(e),
            None => out.excluded_q.push(f.id.clone()),
        }
        out.in_use.push(f.id.clone());
        out.per_feeder.push(FeederError { id: f.id.clone(), e_p, e_q });
    }
    out.empty = ps.is_empty() || qs.is_empty();
    out.e_p_mean = mean(&ps);
    out.e_q_mean = mean(&qs);
    out.e_p_max = ps.iter().copied().fold(0.0, f64::max);
    out.e_q_max = qs.iter().copied().fold(0.0, f64::max);
    Ok(out)
}
