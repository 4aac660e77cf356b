use std::cmp::Ordering;
use std::time::Instant;

use rayon::prelude::*;

use super::lp::{run_highs, Goal, HighsRun};
use super::{strictly_better, Assignment, Backend, Solution, SolveStatus, SolverError, FEASIBILITY_TOL};
use crate::model::{MilpModel, Sense};
use crate::network::{Dsu, Mode, Network, NsPolicy, RunConfig};

/// Default limit on switchable feeders for exhaustive enumeration.
pub const ENUMERATION_CAP: usize = 20;

fn forced_bus_state(net: &Network, cfg: &RunConfig, i: usize) -> Option<bool> {
    match cfg.mode {
        Mode::Reconfiguration => Some(true),
        Mode::Restoration => net.buses[i].fixed_state,
    }
}

/// Every state assignment whose energized part is a forest of rooted trees meeting
/// the island-count rule of `cfg`, in a fixed order.
///
/// Free feeders are walked as a bit mask (lowest feeder first); root buses left
/// without an energized feeder may additionally be energized alone, which is
/// enumerated inside each mask.
pub fn enumerate_radial_configurations(
    net: &Network,
    cfg: &RunConfig,
    cap: usize,
) -> Result<Vec<Assignment>, SolverError> {
    let nb = net.buses.len();
    let nf = net.feeders.len();
    let free: Vec<usize> = (0..nf).filter(|&k| net.feeders[k].forced_state().is_none()).collect();
    if free.len() > cap {
        return Err(SolverError::CapExceeded { switchable: free.len(), cap });
    }
    let forced_on: Vec<usize> = (0..nf).filter(|&k| net.feeders[k].forced_state() == Some(true)).collect();
    let ends: Vec<(usize, usize)> = (0..nf).map(|k| net.endpoints(k)).collect();
    let bus_forced: Vec<Option<bool>> = (0..nb).map(|i| forced_bus_state(net, cfg, i)).collect();

    let mut out = Vec::new();
    'masks: for mask in 0u64..(1u64 << free.len()) {
        let mut w = vec![false; nf];
        for &k in &forced_on {
            w[k] = true;
        }
        for (bit, &k) in free.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                w[k] = true;
            }
        }
        let mut dsu = Dsu::new(nb);
        let mut touched = vec![false; nb];
        for k in (0..nf).filter(|&k| w[k]) {
            let (a, b) = ends[k];
            if !dsu.union(a, b) {
                continue 'masks;
            }
            touched[a] = true;
            touched[b] = true;
        }
        let mut v = touched.clone();
        let mut optional = Vec::new();
        for i in 0..nb {
            match (touched[i], bus_forced[i]) {
                (true, Some(false)) => continue 'masks,
                (true, _) | (false, Some(false)) => {}
                (false, Some(true)) if net.buses[i].is_root => v[i] = true,
                (false, Some(true)) => continue 'masks,
                (false, None) if net.buses[i].is_root => optional.push(i),
                (false, None) => {}
            }
        }
        for sub in 0u64..(1u64 << optional.len()) {
            let mut v = v.clone();
            for (bit, &i) in optional.iter().enumerate() {
                v[i] = sub >> bit & 1 == 1;
            }
            if islands_ok(net, cfg, &v, &mut dsu) {
                out.push(Assignment { v, w: w.clone() });
            }
        }
    }
    Ok(out)
}

fn islands_ok(net: &Network, cfg: &RunConfig, v: &[bool], dsu: &mut Dsu) -> bool {
    let nb = v.len();
    let mut roots_in_tree = vec![0usize; nb];
    let mut is_tree = vec![false; nb];
    for i in (0..nb).filter(|&i| v[i]) {
        let rep = dsu.find(i);
        is_tree[rep] = true;
        if net.buses[i].is_root {
            roots_in_tree[rep] += 1;
        }
    }
    let trees: Vec<usize> = (0..nb).filter(|&r| is_tree[r]).collect();
    if trees.iter().any(|&r| roots_in_tree[r] == 0) {
        return false;
    }
    match cfg.n_s {
        NsPolicy::Fixed(n) => trees.len() == n as usize,
        NsPolicy::EnergizedRoots => trees.iter().all(|&r| roots_in_tree[r] == 1),
    }
}

/// Solves the linear program left after fixing every binary to `fixed`, minimizing
/// feeder losses. The reported objective is the model's own objective at that point.
pub fn solve_continuous_subproblem(model: &MilpModel, fixed: &Assignment) -> Result<Solution, SolverError> {
    let start = Instant::now();
    let run =
        HighsRun { integer: false, fixed: Some(fixed), goal: Goal::Losses, gap: 0.0, warm: None, time_limit: None };
    let out = run_highs(model, &run)?;
    match (out.status, out.values) {
        (SolveStatus::Optimal, Some(values)) => {
            let sol = Solution::from_values(model, values, SolveStatus::Optimal, 0.0, start.elapsed());
            let (worst, row) = model.max_violation(&sol.values);
            if worst > FEASIBILITY_TOL {
                log::warn!(
                    "LP point violates row {} by {worst:.3e}",
                    row.map(|r| model.rows[r].name.as_str()).unwrap_or("?")
                );
            }
            Ok(sol)
        }
        (SolveStatus::Infeasible, _) => Ok(Solution::without_point(SolveStatus::Infeasible, start.elapsed())),
        _ => Ok(Solution::without_point(SolveStatus::Aborted, start.elapsed())),
    }
}

/// Exact backend for desk-scale networks: every radial forest, one LP each.
#[derive(Debug, Clone, Copy)]
pub struct EnumerativeBackend {
    pub cap: usize,
}

impl Default for EnumerativeBackend {
    fn default() -> Self {
        EnumerativeBackend { cap: ENUMERATION_CAP }
    }
}

impl EnumerativeBackend {
    /// Restoration objectives depend on the bus states alone, so candidates are
    /// visited best-first and the first feasible tier settles the optimum.
    fn solve_by_tiers(&self, model: &MilpModel, configs: Vec<Assignment>) -> Result<Option<Solution>, SolverError> {
        let net = &model.network;
        let served =
            |a: &Assignment| -> f64 { net.buses.iter().zip(&a.v).filter(|(_, &on)| on).map(|(b, _)| b.load_p).sum() };
        let mut scored: Vec<(f64, Vec<String>, Assignment)> =
            configs.into_iter().map(|a| (served(&a), a.key(net), a)).collect();
        scored.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(&y.1)));
        let mut start = 0;
        while start < scored.len() {
            let head = scored[start].0;
            let end = scored[start..]
                .iter()
                .position(|s| strictly_better(Sense::Maximize, head, s.0))
                .map_or(scored.len(), |p| start + p);
            let mut tier: Vec<&(f64, Vec<String>, Assignment)> = scored[start..end].iter().collect();
            tier.sort_by(|x, y| x.1.cmp(&y.1));
            for (_, _, a) in tier {
                let sol = solve_continuous_subproblem(model, a)?;
                if sol.status.is_feasible() {
                    return Ok(Some(sol));
                }
            }
            start = end;
        }
        Ok(None)
    }

    fn solve_all(&self, model: &MilpModel, configs: Vec<Assignment>) -> Result<Option<Solution>, SolverError> {
        let net = &model.network;
        let solved: Vec<Result<Solution, SolverError>> =
            configs.par_iter().map(|a| solve_continuous_subproblem(model, a)).collect();
        let mut best: Option<(Solution, Vec<String>)> = None;
        for (a, res) in configs.iter().zip(solved) {
            let sol = res?;
            if !sol.status.is_feasible() {
                continue;
            }
            let key = a.key(net);
            let replace = match &best {
                None => true,
                Some((b, bkey)) => {
                    strictly_better(model.objective.sense, sol.objective, b.objective)
                        || (!strictly_better(model.objective.sense, b.objective, sol.objective)
                            && key.cmp(bkey) == Ordering::Less)
                }
            };
            if replace {
                best = Some((sol, key));
            }
        }
        Ok(best.map(|(s, _)| s))
    }
}

impl Backend for EnumerativeBackend {
    fn name(&self) -> &'static str {
        "enumerate"
    }

    fn solve(&self, model: &MilpModel, _gap: f64, _warm: Option<&Solution>) -> Result<Solution, SolverError> {
        let start = Instant::now();
        let configs = enumerate_radial_configurations(&model.network, &model.config, self.cap)?;
        log::debug!("enumerative backend: {} radial configurations", configs.len());
        let best = match model.config.mode {
            Mode::Restoration => self.solve_by_tiers(model, configs)?,
            Mode::Reconfiguration => self.solve_all(model, configs)?,
        };
        Ok(match best {
            Some(mut sol) => {
                sol.achieved_gap = 0.0;
                sol.wall_time = start.elapsed().as_secs_f64();
                sol
            }
            None => Solution::without_point(SolveStatus::Infeasible, start.elapsed()),
        })
    }
}
