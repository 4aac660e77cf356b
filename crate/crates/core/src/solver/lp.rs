//! Translation of a [`MilpModel`] into a HiGHS problem.

use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem};

use super::{Assignment, SolveStatus, SolverError};
use crate::model::{MilpModel, Relation, Sense};

/// Primal/dual tolerance handed to HiGHS; tighter than the 1e-8 the contract asks for.
const HIGHS_TOL: f64 = 1e-9;

pub(crate) enum Goal {
    /// The model's own objective.
    Model,
    /// Minimize `Σ r·I²` regardless of mode.
    Losses,
}

pub(crate) struct HighsRun<'a> {
    pub integer: bool,
    pub fixed: Option<&'a Assignment>,
    pub goal: Goal,
    pub gap: f64,
    pub warm: Option<&'a [f64]>,
    pub time_limit: Option<f64>,
}

pub(crate) struct HighsOutcome {
    pub status: SolveStatus,
    pub values: Option<Vec<f64>>,
    pub gap: f64,
}

pub(crate) fn run_highs(model: &MilpModel, run: &HighsRun<'_>) -> Result<HighsOutcome, SolverError> {
    let mut cost = vec![0.0; model.variables.len()];
    let sense = match run.goal {
        Goal::Model => {
            for &(j, c) in &model.objective.terms {
                cost[j] += c;
            }
            model.objective.sense
        }
        Goal::Losses => {
            for (f, fv) in model.network.feeders.iter().zip(&model.feeder_vars) {
                cost[fv.i_sqr] += f.r;
            }
            Sense::Minimize
        }
    };

    let mut fixed_value = vec![None; model.variables.len()];
    if let Some(a) = run.fixed {
        if a.v.len() != model.bus_vars.len() || a.w.len() != model.feeder_vars.len() {
            return Err(SolverError::Internal("assignment does not cover every binary".into()));
        }
        for (bv, &on) in model.bus_vars.iter().zip(&a.v) {
            fixed_value[bv.state] = Some(if on { 1.0 } else { 0.0 });
        }
        for (fv, &on) in model.feeder_vars.iter().zip(&a.w) {
            fixed_value[fv.state] = Some(if on { 1.0 } else { 0.0 });
        }
    }

    let mut pb = RowProblem::default();
    let mut cols = Vec::with_capacity(model.variables.len());
    for (j, var) in model.variables.iter().enumerate() {
        let (lo, hi) = match fixed_value[j] {
            Some(x) => {
                if x < var.lower || x > var.upper {
                    // A fixing outside the column box is infeasible outright.
                    return Ok(HighsOutcome { status: SolveStatus::Infeasible, values: None, gap: f64::NAN });
                }
                (x, x)
            }
            None => (var.lower, var.upper),
        };
        let integer = run.integer && var.is_binary() && fixed_value[j].is_none();
        cols.push(pb.add_column_with_integrality(cost[j], lo..=hi, integer));
    }
    for row in &model.rows {
        let factors: Vec<_> = row.terms.iter().map(|&(j, a)| (cols[j], a)).collect();
        match row.relation {
            Relation::Le => pb.add_row(..=row.rhs, factors),
            Relation::Ge => pb.add_row(row.rhs.., factors),
            Relation::Eq => pb.add_row(row.rhs..=row.rhs, factors),
        };
    }

    let highs_sense = match sense {
        Sense::Minimize => highs::Sense::Minimise,
        Sense::Maximize => highs::Sense::Maximise,
    };
    let mut hm = pb
        .try_optimise(highs_sense)
        .map_err(|s| SolverError::Internal(format!("HiGHS rejected the problem: {s:?}")))?;
    hm.make_quiet();
    hm.set_option("primal_feasibility_tolerance", HIGHS_TOL);
    hm.set_option("dual_feasibility_tolerance", HIGHS_TOL);
    if run.integer {
        hm.set_option("mip_rel_gap", run.gap);
        hm.set_option("mip_abs_gap", 0.0);
        hm.set_option("mip_feasibility_tolerance", HIGHS_TOL);
    }
    if let Some(t) = run.time_limit {
        hm.set_option("time_limit", t);
    }
    if let Some(w) = run.warm.filter(|w| w.len() == model.variables.len()) {
        if hm.try_set_solution(Some(w), None, None, None).is_err() {
            log::debug!("HiGHS declined the warm start");
        }
    }

    let solved = hm.try_solve().map_err(|s| SolverError::Internal(format!("HiGHS solve failed: {s:?}")))?;
    let has_point = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
    let gap = if run.integer { solved.mip_gap() } else { 0.0 };
    let status = match solved.status() {
        HighsModelStatus::Optimal if run.integer && gap > 1e-9 => SolveStatus::GapOptimal,
        HighsModelStatus::Optimal => SolveStatus::Optimal,
        HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => SolveStatus::Infeasible,
        other => {
            log::warn!("HiGHS stopped with status {other:?}");
            SolveStatus::Aborted
        }
    };
    let values = (has_point && status != SolveStatus::Infeasible).then(|| solved.get_solution().columns().to_vec());
    Ok(HighsOutcome { status, values, gap })
}
