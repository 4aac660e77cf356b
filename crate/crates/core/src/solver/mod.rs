//! Solving contract for [`MilpModel`] instances and its two implementations.
//!
//! [`EnumerativeBackend`] walks every radial forest and solves the linear program
//! left once the binaries are fixed; [`ExternalBackend`] hands the whole MILP to
//! HiGHS. Both finish by re-solving the continuous part at the chosen topology with
//! feeder losses as the objective, so flows are reported at their loss-minimal
//! operating point even when the primary objective (restored load) is indifferent
//! to them.

mod enumerate;
mod external;
mod lp;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MilpModel, Sense};
use crate::network::Network;
use crate::pwl::PwlSpec;

pub use enumerate::{
    enumerate_radial_configurations, solve_continuous_subproblem, EnumerativeBackend, ENUMERATION_CAP,
};
pub use external::ExternalBackend;

/// Absolute row/bound tolerance that solved points must meet.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Integrality slack below which a binary is snapped to 0 or 1.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver backend unavailable: {0}")]
    Unavailable(String),
    #[error("{switchable} switchable feeders exceed the enumeration cap of {cap}; use the external backend")]
    CapExceeded { switchable: usize, cap: usize },
    #[error("solver returned a non-radial topology: {0}")]
    NonRadial(String),
    #[error("solver failure: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    GapOptimal,
    Infeasible,
    Aborted,
}

impl SolveStatus {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::GapOptimal)
    }
}

/// A bus/feeder state assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub v: Vec<bool>,
    pub w: Vec<bool>,
}

impl Assignment {
    /// Sorted ids of the energized feeders; the deterministic tie-break key.
    pub fn key(&self, net: &Network) -> Vec<String> {
        let mut ids: Vec<String> =
            net.feeders.iter().zip(&self.w).filter(|(_, &on)| on).map(|(f, _)| f.id.clone()).collect();
        ids.sort();
        ids
    }
}

/// Solved values of every model variable, indexed like the network's buses/feeders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: f64,
    pub v: Vec<bool>,
    pub w: Vec<bool>,
    pub p_flow: Vec<f64>,
    pub q_flow: Vec<f64>,
    pub i_sqr: Vec<f64>,
    /// Squared voltage of energized buses; `None` when the bus is off.
    pub v_sqr: Vec<Option<f64>>,
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    pub p_load: Vec<f64>,
    pub q_load: Vec<f64>,
    /// PWL value `Σ φ·Δ` the solver actually filled, per feeder.
    pub p_pwl: Vec<f64>,
    pub q_pwl: Vec<f64>,
    pub achieved_gap: f64,
    pub wall_time: f64,
    /// Full column vector in model order.
    #[serde(skip)]
    pub values: Vec<f64>,
}

impl Solution {
    /// A status-only solution with no point attached.
    pub fn without_point(status: SolveStatus, wall_time: Duration) -> Self {
        Solution {
            status,
            objective: f64::NAN,
            v: Vec::new(),
            w: Vec::new(),
            p_flow: Vec::new(),
            q_flow: Vec::new(),
            i_sqr: Vec::new(),
            v_sqr: Vec::new(),
            p_gen: Vec::new(),
            q_gen: Vec::new(),
            p_load: Vec::new(),
            q_load: Vec::new(),
            p_pwl: Vec::new(),
            q_pwl: Vec::new(),
            achieved_gap: f64::NAN,
            wall_time: wall_time.as_secs_f64(),
            values: Vec::new(),
        }
    }

    /// Reads a full column vector back into named quantities. Binaries are snapped
    /// to 0/1 and continuous values clipped into their column boxes.
    pub fn from_values(
        model: &MilpModel,
        mut values: Vec<f64>,
        status: SolveStatus,
        gap: f64,
        wall_time: Duration,
    ) -> Self {
        for (x, var) in values.iter_mut().zip(&model.variables) {
            if var.is_binary() {
                *x = if *x > 0.5 { 1.0 } else { 0.0 };
            } else {
                *x = x.clamp(var.lower, var.upper);
            }
        }
        let on = |j: usize| values[j] > 0.5;
        let lambda = model.lambda();
        let achieved = |deltas: &[usize], bound: f64| -> f64 {
            let spec = PwlSpec::new(lambda, bound).expect("model bounds are valid");
            deltas.iter().zip(spec.slopes()).map(|(&d, s)| s * values[d]).sum()
        };
        let fv = &model.feeder_vars;
        let bv = &model.bus_vars;
        Solution {
            status,
            objective: model.objective.value(&values),
            v: bv.iter().map(|b| on(b.state)).collect(),
            w: fv.iter().map(|f| on(f.state)).collect(),
            p_flow: fv.iter().map(|f| values[f.p]).collect(),
            q_flow: fv.iter().map(|f| values[f.q]).collect(),
            i_sqr: fv.iter().map(|f| values[f.i_sqr]).collect(),
            v_sqr: bv.iter().map(|b| on(b.state).then(|| values[b.v_sqr])).collect(),
            p_gen: bv.iter().map(|b| values[b.gen_p]).collect(),
            q_gen: bv.iter().map(|b| values[b.gen_q]).collect(),
            p_load: bv.iter().map(|b| values[b.load_p]).collect(),
            q_load: bv.iter().map(|b| values[b.load_q]).collect(),
            p_pwl: fv.iter().enumerate().map(|(k, f)| achieved(&f.delta_p, model.bounds.p_max[k])).collect(),
            q_pwl: fv.iter().enumerate().map(|(k, f)| achieved(&f.delta_q, model.bounds.q_max[k])).collect(),
            achieved_gap: gap,
            wall_time: wall_time.as_secs_f64(),
            values,
        }
    }

    pub fn has_point(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn assignment(&self) -> Assignment {
        Assignment { v: self.v.clone(), w: self.w.clone() }
    }

    /// Sum of `r·I²` over feeders.
    pub fn losses(&self, net: &Network) -> f64 {
        net.feeders.iter().zip(&self.i_sqr).map(|(f, i)| f.r * i).sum()
    }

    pub fn served_load(&self) -> f64 {
        self.p_load.iter().sum()
    }
}

/// `true` when `a` is strictly better than `b` for `sense`, treating objectives within
/// a relative `1e-9` as tied.
pub(crate) fn strictly_better(sense: Sense, a: f64, b: f64) -> bool {
    let tol = 1e-9 * a.abs().max(b.abs()).max(1.0);
    match sense {
        Sense::Minimize => a < b - tol,
        Sense::Maximize => a > b + tol,
    }
}

/// A MILP solver.
pub trait Backend: Sync {
    fn name(&self) -> &'static str;

    /// Solves `model` to relative optimality gap `gap`. `warm`, when given, is offered
    /// as a starting incumbent.
    fn solve(&self, model: &MilpModel, gap: f64, warm: Option<&Solution>) -> Result<Solution, SolverError>;
}
