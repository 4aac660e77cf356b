//! The bound-tightening loop: solve, measure the PWL error, shrink each in-use
//! feeder's approximation bound to `sqrt(f(previous flow))`, solve again.
//!
//! Renewal keeps the previous optimum inside the new feasible set: the renewed bound
//! is at least the previous flow magnitude, and the previous square estimate is
//! still reachable by filling every segment of the new approximation. The driver
//! checks this on every step by substituting the previous point into the new model.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{error_indices, ErrorIndices, MetricsError};
use crate::model::{build_model, count_model, FeederBounds, MilpModel, ModelCounts, ModelError};
use crate::network::{Mode, Network, RunConfig};
use crate::oracle::{check_forest, validate_solution, ExactValidation};
use crate::pwl::{decompose_to_value, pwl_value, PwlError, PwlSpec};
use crate::solver::{Backend, Solution, SolveStatus, SolverError};

/// Smallest renewed bound, pu.
pub const BOUND_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("feeder {feeder}: solved flow inconsistent with its bound: {source}")]
    Bound { feeder: String, source: PwlError },
    #[error("step {g} is infeasible although step {} was feasible; bounds were {prev:?} then {next:?}", g - 1)]
    Robustness { g: u32, prev: Box<FeederBounds>, next: Box<FeederBounds> },
    #[error("step {g} stopped without a usable solution")]
    Aborted { g: u32 },
    #[error("bounds grew at step {g} on feeder {feeder}")]
    BoundIncrease { g: u32, feeder: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    ThresholdMet,
    IterationCap,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub g: u32,
    pub bounds_in: FeederBounds,
    pub solution: Solution,
    pub errors: Option<ErrorIndices>,
    pub model_counts: ModelCounts,
    /// Largest row or bound violation of the previous step's point in this step's
    /// model (absent at step 0).
    pub carried_violation: Option<f64>,
    /// Energized feeder, bus and island counts (absent without a point).
    pub topology: Option<RestorationCounts>,
    pub wall_time: f64,
    pub accumulated_time: f64,
}

impl IterationRecord {
    pub fn e_p_mean(&self) -> Option<f64> {
        self.errors.as_ref().map(|e| e.e_p_mean)
    }

    pub fn e_q_mean(&self) -> Option<f64> {
        self.errors.as_ref().map(|e| e.e_q_mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub network: String,
    pub bus_ids: Vec<String>,
    pub feeder_ids: Vec<String>,
    pub base_mva: f64,
    pub config: RunConfig,
    pub backend: String,
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    pub final_solution: Option<Solution>,
    pub validation: Option<ExactValidation>,
}

impl RunReport {
    /// Sum of logical constraints over every model built during the run.
    pub fn total_constraints(&self) -> usize {
        self.iterations.iter().map(|r| r.model_counts.total_constraints()).sum()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.iterations.last()
    }
}

/// Initial bounds `v_max · i_max` for both flows of every feeder.
pub fn init_bounds(net: &Network) -> FeederBounds {
    let b: Vec<f64> = net.feeders.iter().map(|f| net.v_max * f.i_max).collect();
    FeederBounds { p_max: b.clone(), q_max: b }
}

fn renew_one(y: f64, prev: f64, lambda: u32) -> Result<f64, PwlError> {
    let spec = PwlSpec::new(lambda, prev)?;
    Ok(pwl_value(y, &spec)?.sqrt().max(BOUND_FLOOR).min(prev))
}

/// Renews the bounds of feeders energized in `sol`; others pass through unchanged.
pub fn renew_bounds(
    net: &Network,
    prev: &FeederBounds,
    sol: &Solution,
    lambda: u32,
) -> Result<FeederBounds, DriverError> {
    let mut next = prev.clone();
    for (k, f) in net.feeders.iter().enumerate().filter(|(k, _)| sol.w[*k]) {
        let wrap = |source| DriverError::Bound { feeder: f.id.clone(), source };
        next.p_max[k] = renew_one(sol.p_flow[k], prev.p_max[k], lambda).map_err(wrap)?;
        next.q_max[k] = renew_one(sol.q_flow[k], prev.q_max[k], lambda).map_err(wrap)?;
    }
    Ok(next)
}

/// The previous step's point expressed in `model`'s variables.
///
/// Flows, currents, voltages and states carry over. For every energized feeder the
/// segment variables are refilled in order under the new bound with a total fill
/// chosen so that the approximation keeps the value the previous step filled
/// (clipped to what the new bound can reach).
pub fn carry_over(model: &MilpModel, prev: &Solution) -> Vec<f64> {
    let mut x = prev.values.clone();
    for (k, fv) in model.feeder_vars.iter().enumerate().filter(|(k, _)| prev.w[*k]) {
        for (y, achieved, bound, plus, minus, deltas) in [
            (prev.p_flow[k], prev.p_pwl[k], model.bounds.p_max[k], fv.p_plus, fv.p_minus, &fv.delta_p),
            (prev.q_flow[k], prev.q_pwl[k], model.bounds.q_max[k], fv.q_plus, fv.q_minus, &fv.delta_q),
        ] {
            let Ok(spec) = PwlSpec::new(model.lambda(), bound) else { continue };
            let Ok(lo) = pwl_value(y, &spec) else { continue };
            let target = achieved.clamp(lo, bound * bound);
            if let Ok(d) = decompose_to_value(y, target, &spec, f64::INFINITY) {
                x[plus] = d.y_plus;
                x[minus] = d.y_minus;
                for (&j, &v) in deltas.iter().zip(&d.deltas) {
                    x[j] = v;
                }
            }
        }
    }
    x
}

/// Largest row or column-bound violation of `x` in `model`.
pub fn point_violation(model: &MilpModel, x: &[f64]) -> f64 {
    model.max_violation(x).0.max(model.max_bound_violation(x))
}

fn check_monotone(net: &Network, g: u32, prev: &FeederBounds, next: &FeederBounds) -> Result<(), DriverError> {
    for (k, f) in net.feeders.iter().enumerate() {
        if next.p_max[k] > prev.p_max[k] || next.q_max[k] > prev.q_max[k] {
            return Err(DriverError::BoundIncrease { g, feeder: f.id.clone() });
        }
    }
    Ok(())
}

/// Runs the multi-step procedure. With `max_iters = 0` this is a single direct solve.
pub fn run_multistep(net: &Network, cfg: &RunConfig, backend: &dyn Backend) -> Result<RunReport, DriverError> {
    let mut report = RunReport {
        network: net.name.clone(),
        bus_ids: net.buses.iter().map(|b| b.id.clone()).collect(),
        feeder_ids: net.feeders.iter().map(|f| f.id.clone()).collect(),
        base_mva: net.base_mva,
        config: cfg.clone(),
        backend: backend.name().to_string(),
        iterations: Vec::new(),
        termination: Termination::Infeasible,
        final_solution: None,
        validation: None,
    };
    let mut bounds = init_bounds(net);
    let mut warm: Option<Solution> = None;
    let mut carried = None;
    let mut accumulated = 0.0;
    let mut g = 0u32;
    loop {
        let start = Instant::now();
        let model = build_model(net, cfg, &bounds)?;
        let counts = count_model(&model)?;
        if let Some(prev) = &warm {
            let x = carry_over(&model, prev);
            let viol = point_violation(&model, &x);
            if viol > 1e-8 {
                log::warn!("step {g}: previous point violates the renewed model by {viol:.3e}");
            }
            carried = Some(viol);
            warm = Some(Solution { values: x, ..prev.clone() });
        }
        let sol = backend.solve(&model, cfg.mip_gap, warm.as_ref())?;
        match sol.status {
            SolveStatus::Infeasible if g == 0 => {
                let wall = start.elapsed().as_secs_f64();
                accumulated += wall;
                report.iterations.push(IterationRecord {
                    g,
                    bounds_in: bounds,
                    solution: sol,
                    errors: None,
                    model_counts: counts,
                    carried_violation: None,
                    topology: None,
                    wall_time: wall,
                    accumulated_time: accumulated,
                });
                report.termination = Termination::Infeasible;
                return Ok(report);
            }
            SolveStatus::Infeasible => {
                let prev = report.iterations.last().map(|r| r.bounds_in.clone()).unwrap_or_else(|| bounds.clone());
                return Err(DriverError::Robustness { g, prev: Box::new(prev), next: Box::new(bounds) });
            }
            SolveStatus::Aborted => return Err(DriverError::Aborted { g }),
            SolveStatus::Optimal | SolveStatus::GapOptimal => {}
        }
        let forest = check_forest(net, &sol.v, &sol.w);
        if !forest.is_valid() {
            return Err(SolverError::NonRadial(forest.to_string()).into());
        }
        let errors = error_indices(net, &sol, &bounds, cfg.lambda, cfg.denom_floor)?;
        let wall = start.elapsed().as_secs_f64();
        accumulated += wall;
        let met = errors.e_p_mean <= cfg.eps_p && errors.e_q_mean <= cfg.eps_q;
        log::info!(
            "step {g}: objective {:.6e}, E_p {:.6}%, E_q {:.6}%",
            sol.objective,
            errors.e_p_mean,
            errors.e_q_mean
        );
        report.iterations.push(IterationRecord {
            g,
            bounds_in: bounds.clone(),
            solution: sol.clone(),
            errors: Some(errors),
            model_counts: counts,
            carried_violation: carried,
            topology: Some(restoration_counts(net, &sol)),
            wall_time: wall,
            accumulated_time: accumulated,
        });
        if met || g >= cfg.max_iters {
            report.termination = if met { Termination::ThresholdMet } else { Termination::IterationCap };
            report.validation = Some(validate_solution(net, &sol, &bounds, cfg.lambda));
            report.final_solution = Some(sol);
            return Ok(report);
        }
        let next = renew_bounds(net, &bounds, &sol, cfg.lambda)?;
        check_monotone(net, g + 1, &bounds, &next)?;
        bounds = next;
        warm = Some(sol);
        g += 1;
    }
}

/// Served-topology counts of a restoration solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestorationCounts {
    pub feeders: usize,
    pub buses: usize,
    pub islands: usize,
}

pub fn restoration_counts(net: &Network, sol: &Solution) -> RestorationCounts {
    let forest = check_forest(net, &sol.v, &sol.w);
    RestorationCounts { feeders: forest.edges, buses: forest.vertices, islands: forest.trees }
}

/// Mode-dependent label of the objective.
pub fn objective_label(mode: Mode) -> &'static str {
    match mode {
        Mode::Reconfiguration => "feeder losses",
        Mode::Restoration => "restored load",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Bus, Feeder};

    fn sol_with(w: Vec<bool>, p: Vec<f64>, q: Vec<f64>) -> Solution {
        let mut s = Solution::without_point(SolveStatus::Optimal, std::time::Duration::ZERO);
        s.w = w;
        s.p_flow = p;
        s.q_flow = q;
        s
    }

    fn two_feeders() -> Network {
        Network::new(
            "t",
            vec![Bus::root("s", (0.0, 5.0), (-5.0, 5.0)), Bus::load("a", 0.1, 0.0), Bus::load("b", 0.1, 0.0)],
            vec![Feeder::new("f1", "s", "a", 0.01, 0.01, 2.8579), Feeder::new("f2", "a", "b", 0.01, 0.01, 1.0)],
            (0.95, 1.0, 1.05),
            (1.0, 6.6),
        )
    }

    #[test]
    fn init_is_vmax_times_imax() {
        let b = init_bounds(&two_feeders());
        assert!((b.p_max[0] - 3.000795).abs() < 1e-12);
        assert_eq!(b.q_max[1], 1.05);
    }

    #[test]
    fn renewal_examples() {
        let net = two_feeders();
        let prev = FeederBounds { p_max: vec![10.0, 3.0008], q_max: vec![10.0, 3.0008] };
        let sol = sol_with(vec![true, false], vec![0.5, 0.0], vec![10.0, 0.0]);
        let next = renew_bounds(&net, &prev, &sol, 10).unwrap();
        assert!((next.p_max[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(next.q_max[0], 10.0);
        assert_eq!((next.p_max[1], next.q_max[1]), (3.0008, 3.0008));
    }

    #[test]
    fn renewal_floor() {
        let net = two_feeders();
        let prev = FeederBounds::uniform(2, 1.0);
        let next = renew_bounds(&net, &prev, &sol_with(vec![true, true], vec![0.0, 0.0], vec![0.0, 0.0]), 10).unwrap();
        assert_eq!(next.p_max, vec![BOUND_FLOOR; 2]);
    }

    #[test]
    fn renewal_rejects_overflow() {
        let net = two_feeders();
        let prev = FeederBounds::uniform(2, 1.0);
        let err =
            renew_bounds(&net, &prev, &sol_with(vec![true, false], vec![1.5, 0.0], vec![0.0, 0.0]), 10).unwrap_err();
        assert!(matches!(err, DriverError::Bound { ref feeder, .. } if feeder == "f1"));
    }
}
