#![allow(dead_code)]

use lpp_core::model::MilpModel;
use lpp_core::multistep::RunReport;
use lpp_core::network::{Bus, Feeder, Mode, Network};
use lpp_core::oracle::{ExactFlowState, Injections};
use lpp_core::pwl::{pwl_eval, pwl_max_gap, PwlSpec};
use lpp_core::validate_network;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A per-unit two-bus line: root `s` feeding load `a` through feeder `f`.
pub fn two_bus(load: (f64, f64), r: f64, x: f64, i_max: f64) -> Network {
    Network::new(
        "two-bus",
        vec![Bus::root("s", (0.0, 10.0), (-10.0, 10.0)), Bus::load("a", load.0, load.1)],
        vec![Feeder::new("f", "s", "a", r, x, i_max)],
        (0.95, 1.0, 1.05),
        (1.0, 6.6),
    )
}

/// Random connected network with at most eight switchable feeders.
///
/// Reconfiguration networks have one substation (bus `b0`). Restoration networks
/// keep the substation but fix it off and add one or two DG sources whose capacity
/// covers only part of the load.
pub fn random_network(seed: u64, mode: Mode) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(4..=7);
    let ids: Vec<String> = (0..n).map(|i| format!("b{i}")).collect();
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    let extra = rng.gen_range(1..=(8 - edges.len()).min(3));
    let mut attempts = 0;
    while edges.len() < n - 1 + extra && attempts < 100 {
        attempts += 1;
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && !edges.iter().any(|&(u, v)| (u, v) == (a, b) || (u, v) == (b, a)) {
            edges.push((a.min(b), a.max(b)));
        }
    }
    let mut buses: Vec<Bus> = ids
        .iter()
        .map(|id| {
            let p = rng.gen_range(0.05..0.3);
            let q = p * rng.gen_range(0.2..0.5);
            Bus::load(id.clone(), p, q)
        })
        .collect();
    buses[0] = Bus::root("b0", (0.0, 10.0), (-10.0, 10.0));
    if mode == Mode::Restoration {
        buses[0].fixed_state = Some(false);
        let total: f64 = buses.iter().map(|b| b.load_p).sum();
        let n_dg = rng.gen_range(1..=2);
        let mut hosts: Vec<usize> = Vec::new();
        while hosts.len() < n_dg {
            let h = rng.gen_range(1..n);
            if !hosts.contains(&h) {
                hosts.push(h);
            }
        }
        for h in hosts {
            let cap = total * rng.gen_range(0.25..0.6);
            let b = &mut buses[h];
            b.is_root = true;
            b.gen_p_max = cap;
            b.gen_q_min = -0.5 * cap;
            b.gen_q_max = 0.5 * cap;
        }
    }
    let feeders = edges
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let r = rng.gen_range(0.005..0.02);
            let x = rng.gen_range(0.005..0.02);
            Feeder::new(format!("f{k}"), ids[a].clone(), ids[b].clone(), r, x, 2.0)
        })
        .collect();
    let net = Network::new(format!("random-{seed}"), buses, feeders, (0.95, 1.0, 1.05), (1.0, 6.6));
    let report = validate_network(&net);
    assert!(report.is_empty(), "generator produced an invalid network: {report}");
    net
}

/// The model's variable vector at an exact power-flow state, with canonical PWL
/// decompositions under the model's bounds. De-energized buses get `V² = 0`.
pub fn exact_point(model: &MilpModel, v: &[bool], w: &[bool], inj: &Injections, state: &ExactFlowState) -> Vec<f64> {
    let mut x = vec![0.0; model.variables.len()];
    for (i, bv) in model.bus_vars.iter().enumerate() {
        x[bv.state] = if v[i] { 1.0 } else { 0.0 };
        x[bv.gen_p] = state.p_gen[i];
        x[bv.gen_q] = state.q_gen[i];
        x[bv.load_p] = inj.p_load[i];
        x[bv.load_q] = inj.q_load[i];
        x[bv.v_sqr] = state.v_sqr[i].unwrap_or(0.0);
    }
    for (k, fv) in model.feeder_vars.iter().enumerate() {
        x[fv.state] = if w[k] { 1.0 } else { 0.0 };
        x[fv.p] = state.p[k];
        x[fv.q] = state.q[k];
        x[fv.i_sqr] = state.i_sqr[k];
        let pspec = PwlSpec::new(model.lambda(), model.bounds.p_max[k]).unwrap();
        let qspec = PwlSpec::new(model.lambda(), model.bounds.q_max[k]).unwrap();
        let (_, dp) = pwl_eval(state.p[k], &pspec).unwrap();
        let (_, dq) = pwl_eval(state.q[k], &qspec).unwrap();
        x[fv.p_plus] = dp.y_plus;
        x[fv.p_minus] = dp.y_minus;
        x[fv.q_plus] = dq.y_plus;
        x[fv.q_minus] = dq.y_minus;
        for (&j, &d) in fv.delta_p.iter().zip(&dp.deltas) {
            x[j] = d;
        }
        for (&j, &d) in fv.delta_q.iter().zip(&dq.deltas) {
            x[j] = d;
        }
    }
    x
}

/// Properties every multi-step run must satisfy. Returns a description of the first
/// breach.
pub fn run_invariants(report: &RunReport) -> Result<(), String> {
    let lambda = report.config.lambda;
    for pair in report.iterations.windows(2) {
        let (a, b) = (&pair[0].bounds_in, &pair[1].bounds_in);
        for k in 0..a.len() {
            if b.p_max[k] > a.p_max[k] || b.q_max[k] > a.q_max[k] {
                return Err(format!("bound of feeder {} grew at step {}", report.feeder_ids[k], pair[1].g));
            }
            let gap = |y: f64| pwl_max_gap(&PwlSpec::new(lambda, y).unwrap());
            if gap(b.p_max[k]) > gap(a.p_max[k]) || gap(b.q_max[k]) > gap(a.q_max[k]) {
                return Err(format!("error supremum of feeder {} grew at step {}", report.feeder_ids[k], pair[1].g));
            }
        }
    }
    for it in &report.iterations {
        if let Some(c) = it.carried_violation {
            if c.is_nan() || c > 1e-8 {
                return Err(format!("previous point violates step {} by {c:e}", it.g));
            }
        }
    }
    if let Some(val) = &report.validation {
        if !val.forest.is_valid() {
            return Err(format!("final topology is not a valid forest: {}", val.forest));
        }
        if !val.passed {
            return Err(format!("exact validation failed: {val:?}"));
        }
    }
    Ok(())
}
