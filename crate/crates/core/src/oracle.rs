//! Exact reference computations: nonlinear DistFlow on a fixed radial topology,
//! a topology structure check and a brute-force optimizer for small networks.

use std::collections::VecDeque;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FeederBounds, Sense};
use crate::network::{Dsu, Mode, Network, RunConfig};
use crate::pwl::{pwl_max_gap, PwlSpec};
use crate::solver::{enumerate_radial_configurations, strictly_better, Assignment, Solution, SolverError};

/// Sweep convergence threshold on the largest update of `V²` or `I²`.
pub const SWEEP_TOL: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 500;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("topology is not a rooted forest: {0}")]
    NotForest(ForestReport),
    #[error("power-flow sweep did not converge within {0} iterations")]
    Diverged(usize),
    #[error("injection vectors must have one entry per bus")]
    BadInjections,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Structure of an energized topology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestReport {
    pub is_forest: bool,
    /// Connected components of the energized subgraph.
    pub trees: usize,
    pub vertices: usize,
    pub edges: usize,
    /// Smallest bus id of each energized component without an energized root.
    pub rootless: Vec<String>,
    /// Energized feeders with a de-energized endpoint.
    pub endpoint_violations: Vec<String>,
    /// Whether `edges = vertices − trees`.
    pub counting_identity: bool,
}

impl ForestReport {
    pub fn is_valid(&self) -> bool {
        self.is_forest && self.rootless.is_empty() && self.endpoint_violations.is_empty() && self.counting_identity
    }
}

impl fmt::Display for ForestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} edges on {} vertices in {} components", self.edges, self.vertices, self.trees)?;
        if !self.is_forest {
            write!(f, "; contains a loop")?;
        }
        if !self.rootless.is_empty() {
            write!(f, "; rootless components at {}", self.rootless.join(", "))?;
        }
        if !self.endpoint_violations.is_empty() {
            write!(f, "; feeders with a dead endpoint: {}", self.endpoint_violations.join(", "))?;
        }
        Ok(())
    }
}

/// Checks that energized feeders form a forest whose every component holds an
/// energized root, with consistent bus/feeder states.
pub fn check_forest(net: &Network, v: &[bool], w: &[bool]) -> ForestReport {
    let nb = net.buses.len();
    let mut dsu = Dsu::new(nb);
    let mut is_forest = true;
    let mut endpoint_violations = Vec::new();
    for (k, f) in net.feeders.iter().enumerate().filter(|(k, _)| w[*k]) {
        let (a, b) = net.endpoints(k);
        if !(v[a] && v[b]) {
            endpoint_violations.push(f.id.clone());
        }
        if !dsu.union(a, b) {
            is_forest = false;
        }
    }
    let mut has_root = vec![false; nb];
    let mut is_comp = vec![false; nb];
    for i in (0..nb).filter(|&i| v[i]) {
        let r = dsu.find(i);
        is_comp[r] = true;
        has_root[r] |= net.buses[i].is_root;
    }
    // The DSU keeps the smallest index as representative.
    let rootless = (0..nb).filter(|&r| is_comp[r] && !has_root[r]).map(|r| net.buses[r].id.clone()).collect();
    let trees = is_comp.iter().filter(|&&c| c).count();
    let vertices = v.iter().filter(|&&x| x).count();
    let edges = w.iter().filter(|&&x| x).count();
    ForestReport {
        is_forest,
        trees,
        vertices,
        edges,
        rootless,
        endpoint_violations,
        counting_identity: edges + trees == vertices,
    }
}

/// Per-bus injections for a power-flow solve. The generation of each tree's slack
/// bus is overwritten by the solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injections {
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    pub p_load: Vec<f64>,
    pub q_load: Vec<f64>,
}

impl Injections {
    /// Served nominal loads on energized buses, no generation besides the slacks.
    pub fn served_loads(net: &Network, v: &[bool]) -> Self {
        let n = net.buses.len();
        let pick = |on: bool, x: f64| if on { x } else { 0.0 };
        Injections {
            p_gen: net.buses.iter().map(|b| 0f64.clamp(b.gen_p_min.min(0.0), b.gen_p_max.max(0.0))).collect(),
            q_gen: vec![0.0; n],
            p_load: net.buses.iter().zip(v).map(|(b, &on)| pick(on, b.load_p)).collect(),
            q_load: net.buses.iter().zip(v).map(|(b, &on)| pick(on, b.load_q)).collect(),
        }
    }

    pub fn from_solution(sol: &Solution) -> Self {
        Injections {
            p_gen: sol.p_gen.clone(),
            q_gen: sol.q_gen.clone(),
            p_load: sol.p_load.clone(),
            q_load: sol.q_load.clone(),
        }
    }
}

/// Exact DistFlow state in the model's sign convention (flows measured at each
/// feeder's `to` end).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactFlowState {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub i_sqr: Vec<f64>,
    pub v_sqr: Vec<Option<f64>>,
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    /// Slack bus index of each tree.
    pub slacks: Vec<usize>,
    /// Largest residual of the balance, voltage-drop and current-square equations.
    pub residual: f64,
    pub sweeps: usize,
}

impl ExactFlowState {
    pub fn losses(&self, net: &Network) -> f64 {
        net.feeders.iter().zip(&self.i_sqr).map(|(f, i)| f.r * i).sum()
    }

    /// Residuals of the balance, drop and current-square equations.
    pub fn residuals(&self, net: &Network, v: &[bool], w: &[bool], inj: &Injections) -> f64 {
        let mut worst = 0f64;
        let mut bal_p = vec![0.0; net.buses.len()];
        let mut bal_q = vec![0.0; net.buses.len()];
        for (i, _) in net.buses.iter().enumerate().filter(|(i, _)| v[*i]) {
            bal_p[i] = self.p_gen[i] - inj.p_load[i];
            bal_q[i] = self.q_gen[i] - inj.q_load[i];
        }
        for (k, f) in net.feeders.iter().enumerate().filter(|(k, _)| w[*k]) {
            let (a, b) = net.endpoints(k);
            bal_p[b] += self.p[k];
            bal_q[b] += self.q[k];
            bal_p[a] -= self.p[k] + f.r * self.i_sqr[k];
            bal_q[a] -= self.q[k] + f.x * self.i_sqr[k];
            let (va, vb) = (self.v_sqr[a].unwrap_or(f64::NAN), self.v_sqr[b].unwrap_or(f64::NAN));
            let drop = va - vb - 2.0 * (f.r * self.p[k] + f.x * self.q[k]) - f.z_sqr() * self.i_sqr[k];
            let square = vb * self.i_sqr[k] - (self.p[k].powi(2) + self.q[k].powi(2));
            worst = worst.max(drop.abs()).max(square.abs());
        }
        bal_p.iter().chain(&bal_q).fold(worst, |m, r| m.max(r.abs()))
    }
}

struct TreeEdge {
    feeder: usize,
    parent: usize,
    child: usize,
}

/// Solves the exact DistFlow equations on a radial topology by backward/forward
/// sweeps from a flat start. Each tree's slack is its energized root with the
/// largest active generation limit (lowest index on ties), held at `slack_v_sqr`.
pub fn distflow_solve(
    net: &Network,
    v: &[bool],
    w: &[bool],
    inj: &Injections,
    slack_v_sqr: f64,
) -> Result<ExactFlowState, OracleError> {
    let nb = net.buses.len();
    let nf = net.feeders.len();
    if [&inj.p_gen, &inj.q_gen, &inj.p_load, &inj.q_load].iter().any(|x| x.len() != nb) {
        return Err(OracleError::BadInjections);
    }
    let report = check_forest(net, v, w);
    if !report.is_valid() {
        return Err(OracleError::NotForest(report));
    }

    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nb];
    for k in (0..nf).filter(|&k| w[k]) {
        let (a, b) = net.endpoints(k);
        adj[a].push((b, k));
        adj[b].push((a, k));
    }
    let mut seen = vec![false; nb];
    let mut order = Vec::new();
    let mut edges: Vec<TreeEdge> = Vec::new();
    let mut parent_edge = vec![usize::MAX; nb];
    let mut slacks = Vec::new();
    let mut candidates: Vec<usize> = (0..nb).filter(|&i| v[i] && net.buses[i].is_root).collect();
    candidates.sort_by(|&a, &b| net.buses[b].gen_p_max.total_cmp(&net.buses[a].gen_p_max).then(a.cmp(&b)));
    for s in candidates {
        if seen[s] {
            continue;
        }
        slacks.push(s);
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(c, k) in &adj[u] {
                if !seen[c] {
                    seen[c] = true;
                    parent_edge[c] = edges.len();
                    edges.push(TreeEdge { feeder: k, parent: u, child: c });
                    queue.push_back(c);
                }
            }
        }
    }

    let mut vs = vec![slack_v_sqr; nb];
    let mut l = vec![0.0; nf];
    let mut s_recv = vec![(0.0, 0.0); nb];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(OracleError::Diverged(MAX_SWEEPS));
        }
        // Backward: demand seen at the child end of each tree edge.
        let mut demand: Vec<(f64, f64)> =
            (0..nb).map(|i| (inj.p_load[i] - inj.p_gen[i], inj.q_load[i] - inj.q_gen[i])).collect();
        let mut delta = 0f64;
        for &c in order.iter().rev() {
            let e = parent_edge[c];
            if e == usize::MAX {
                continue;
            }
            let TreeEdge { feeder, parent, .. } = edges[e];
            let f = &net.feeders[feeder];
            let (p, q) = demand[c];
            let new_l = (p * p + q * q) / vs[c];
            delta = delta.max((new_l - l[feeder]).abs());
            l[feeder] = new_l;
            s_recv[c] = (p, q);
            demand[parent].0 += p + f.r * new_l;
            demand[parent].1 += q + f.x * new_l;
        }
        // Forward: voltage drop along each edge from the sending end.
        for &c in &order {
            let e = parent_edge[c];
            if e == usize::MAX {
                continue;
            }
            let TreeEdge { feeder, parent, .. } = edges[e];
            let f = &net.feeders[feeder];
            let (ps, qs) = (s_recv[c].0 + f.r * l[feeder], s_recv[c].1 + f.x * l[feeder]);
            let new_v = vs[parent] - 2.0 * (f.r * ps + f.x * qs) + f.z_sqr() * l[feeder];
            delta = delta.max((new_v - vs[c]).abs());
            vs[c] = new_v;
        }
        if vs.iter().chain(&l).any(|x| !x.is_finite()) || vs.iter().enumerate().any(|(i, &x)| v[i] && x <= 0.0) {
            return Err(OracleError::Diverged(sweeps));
        }
        if delta < SWEEP_TOL {
            break;
        }
    }

    let mut p = vec![0.0; nf];
    let mut q = vec![0.0; nf];
    let mut p_gen = inj.p_gen.clone();
    let mut q_gen = inj.q_gen.clone();
    for &s in &slacks {
        p_gen[s] = inj.p_load[s];
        q_gen[s] = inj.q_load[s];
    }
    for e in &edges {
        let f = &net.feeders[e.feeder];
        let (pr, qr) = s_recv[e.child];
        let (ps, qs) = (pr + f.r * l[e.feeder], qr + f.x * l[e.feeder]);
        let (_, to) = net.endpoints(e.feeder);
        if to == e.child {
            p[e.feeder] = pr;
            q[e.feeder] = qr;
        } else {
            p[e.feeder] = -ps;
            q[e.feeder] = -qs;
        }
        if slacks.contains(&e.parent) {
            p_gen[e.parent] += ps;
            q_gen[e.parent] += qs;
        }
    }
    let mut state = ExactFlowState {
        p,
        q,
        i_sqr: l,
        v_sqr: (0..nb).map(|i| v[i].then_some(vs[i])).collect(),
        p_gen,
        q_gen,
        slacks,
        residual: 0.0,
        sweeps,
    };
    let inj_final = Injections { p_gen: state.p_gen.clone(), q_gen: state.q_gen.clone(), ..inj.clone() };
    state.residual = state.residuals(net, v, w, &inj_final);
    Ok(state)
}

/// Operating-limit check of an exact state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCheck {
    /// Largest excursion of `V²` outside `[v_min², v_max²]`.
    pub voltage_excess: f64,
    /// Largest `I/I_max − 1` over energized feeders.
    pub current_excess: f64,
    /// Largest excursion of slack generation outside its bounds.
    pub generation_excess: f64,
}

pub fn limit_check(net: &Network, w: &[bool], state: &ExactFlowState) -> LimitCheck {
    let (lo, hi) = (net.v_min * net.v_min, net.v_max * net.v_max);
    let voltage_excess = state.v_sqr.iter().flatten().map(|&x| (lo - x).max(x - hi).max(0.0)).fold(0.0, f64::max);
    let current_excess = net
        .feeders
        .iter()
        .zip(&state.i_sqr)
        .zip(w)
        .filter(|(_, &on)| on)
        .map(|((f, &l), _)| (l.sqrt() / f.i_max - 1.0).max(0.0))
        .fold(0.0, f64::max);
    let generation_excess = state
        .slacks
        .iter()
        .map(|&s| {
            let b = &net.buses[s];
            let ep = (b.gen_p_min - state.p_gen[s]).max(state.p_gen[s] - b.gen_p_max);
            let eq = (b.gen_q_min - state.q_gen[s]).max(state.q_gen[s] - b.gen_q_max);
            ep.max(eq).max(0.0)
        })
        .fold(0.0, f64::max);
    LimitCheck { voltage_excess, current_excess, generation_excess }
}

/// Exact-feasibility verdict on a solved topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactValidation {
    pub forest: ForestReport,
    pub converged: bool,
    pub limits: Option<LimitCheck>,
    pub exact_losses: Option<f64>,
    pub milp_losses: f64,
    /// Allowed relative loss mismatch: the larger of 1 % and the PWL gap contribution.
    pub loss_tolerance: f64,
    pub loss_relative_error: Option<f64>,
    pub passed: bool,
}

/// Voltage slack (pu²) and current slack (relative) accepted by [`validate_solution`].
pub const VOLTAGE_SLACK: f64 = 1e-4;
pub const CURRENT_SLACK: f64 = 1e-3;

/// Runs the exact power flow on a solution's topology and injections and compares
/// limits and losses.
pub fn validate_solution(net: &Network, sol: &Solution, bounds: &FeederBounds, lambda: u32) -> ExactValidation {
    let forest = check_forest(net, &sol.v, &sol.w);
    let milp_losses = sol.losses(net);
    let vn2 = net.v_norm * net.v_norm;
    let gap_losses: f64 = net
        .feeders
        .iter()
        .enumerate()
        .filter(|(k, _)| sol.w[*k])
        .map(|(k, f)| {
            let gp = PwlSpec::new(lambda, bounds.p_max[k]).map(|s| pwl_max_gap(&s)).unwrap_or(0.0);
            let gq = PwlSpec::new(lambda, bounds.q_max[k]).map(|s| pwl_max_gap(&s)).unwrap_or(0.0);
            f.r * (gp + gq) / vn2
        })
        .sum();
    let mut out = ExactValidation {
        forest: forest.clone(),
        converged: false,
        limits: None,
        exact_losses: None,
        milp_losses,
        loss_tolerance: 0.01,
        loss_relative_error: None,
        passed: false,
    };
    if !forest.is_valid() {
        return out;
    }
    let state = match distflow_solve(net, &sol.v, &sol.w, &Injections::from_solution(sol), vn2) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("exact power flow failed on the accepted topology: {e}");
            return out;
        }
    };
    let exact = state.losses(net);
    let limits = limit_check(net, &sol.w, &state);
    let rel = if exact > 0.0 { (milp_losses - exact).abs() / exact } else { milp_losses.abs() };
    out.loss_tolerance = if exact > 0.0 { 0.01f64.max(gap_losses / exact) } else { 0.01f64.max(gap_losses) };
    out.converged = true;
    out.passed =
        limits.voltage_excess <= VOLTAGE_SLACK && limits.current_excess <= CURRENT_SLACK && rel <= out.loss_tolerance;
    out.limits = Some(limits);
    out.exact_losses = Some(exact);
    out.loss_relative_error = Some(rel);
    out
}

/// Ground-truth optimum found by exhaustive enumeration with exact power flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub assignment: Assignment,
    /// Exact losses (reconfiguration) or served active load (restoration).
    pub objective: f64,
    pub state: ExactFlowState,
    pub evaluated: usize,
    pub feasible: usize,
}

/// Scores one topology exactly; `None` when the power flow diverges or a limit is
/// broken.
pub fn exact_objective(net: &Network, cfg: &RunConfig, a: &Assignment) -> Option<(f64, ExactFlowState)> {
    let inj = Injections::served_loads(net, &a.v);
    let state = distflow_solve(net, &a.v, &a.w, &inj, net.v_norm * net.v_norm).ok()?;
    let lim = limit_check(net, &a.w, &state);
    const TOL: f64 = 1e-9;
    if lim.voltage_excess > TOL || lim.current_excess > TOL || lim.generation_excess > TOL {
        return None;
    }
    let value = match cfg.mode {
        Mode::Reconfiguration => state.losses(net),
        Mode::Restoration => inj.p_load.iter().sum(),
    };
    Some((value, state))
}

/// Enumerates every radial configuration, solves each exactly and returns the best
/// one under the deterministic tie-break (smallest sorted energized feeder id list).
pub fn brute_force_optimum(
    net: &Network,
    cfg: &RunConfig,
    cap: usize,
) -> Result<Option<BruteForceResult>, OracleError> {
    let configs = enumerate_radial_configurations(net, cfg, cap)?;
    let sense = match cfg.mode {
        Mode::Reconfiguration => Sense::Minimize,
        Mode::Restoration => Sense::Maximize,
    };
    let scored: Vec<Option<(f64, ExactFlowState)>> = configs.par_iter().map(|a| exact_objective(net, cfg, a)).collect();
    let evaluated = configs.len();
    let feasible = scored.iter().filter(|s| s.is_some()).count();
    let mut best: Option<(Assignment, Vec<String>, f64, ExactFlowState)> = None;
    for (a, s) in configs.into_iter().zip(scored) {
        let Some((value, state)) = s else { continue };
        let key = a.key(net);
        let replace = match &best {
            None => true,
            Some((_, bkey, bval, _)) => {
                strictly_better(sense, value, *bval) || (!strictly_better(sense, *bval, value) && key < *bkey)
            }
        };
        if replace {
            best = Some((a, key, value, state));
        }
    }
    Ok(best.map(|(assignment, _, objective, state)| BruteForceResult {
        assignment,
        objective,
        state,
        evaluated,
        feasible,
    }))
}
