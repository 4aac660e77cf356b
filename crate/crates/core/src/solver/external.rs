use std::time::Instant;

use super::enumerate::solve_continuous_subproblem;
use super::lp::{run_highs, Goal, HighsRun};
use super::{Backend, Solution, SolveStatus, SolverError};
use crate::model::MilpModel;
use crate::oracle::check_forest;

/// Branch-and-bound through HiGHS.
///
/// The incumbent topology is checked for radiality (the counting constraint alone
/// admits a loop next to an isolated bus) and then re-solved as an LP with the
/// binaries fixed.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExternalBackend {
    /// Wall-clock limit per MILP solve, seconds.
    pub time_limit: Option<f64>,
}

impl Backend for ExternalBackend {
    fn name(&self) -> &'static str {
        "external"
    }

    fn solve(&self, model: &MilpModel, gap: f64, warm: Option<&Solution>) -> Result<Solution, SolverError> {
        let start = Instant::now();
        let warm_values = warm.filter(|w| w.has_point()).map(|w| w.values.as_slice());
        let run = HighsRun {
            integer: true,
            fixed: None,
            goal: Goal::Model,
            gap,
            warm: warm_values,
            time_limit: self.time_limit,
        };
        let out = run_highs(model, &run)?;
        let values = match (out.status, out.values) {
            (SolveStatus::Infeasible, _) | (_, None) => {
                return Ok(Solution::without_point(out.status, start.elapsed()))
            }
            (_, Some(values)) => values,
        };
        let incumbent = Solution::from_values(model, values, out.status, out.gap, start.elapsed());
        let report = check_forest(&model.network, &incumbent.v, &incumbent.w);
        if !report.is_valid() {
            return Err(SolverError::NonRadial(report.to_string()));
        }
        let polished = solve_continuous_subproblem(model, &incumbent.assignment())?;
        let mut sol = if polished.status.is_feasible() {
            polished
        } else {
            log::warn!("fixed-topology re-solve failed ({:?}); keeping the MILP point", polished.status);
            incumbent
        };
        sol.status = out.status;
        sol.achieved_gap = out.gap;
        sol.wall_time = start.elapsed().as_secs_f64();
        Ok(sol)
    }
}
