//! Assembly of the piecewise-linearized load pick-up MILP.
//!
//! Flows follow the receiving-end branch-flow convention: `P_ij` is the active power
//! delivered at the `to` end, so bus `i` sends `P_ij + r·I_ij` into the feeder and the
//! squared voltage drops by `2(r·P_ij + x·Q_ij) + (r² + x²)·I_ij` along it. A negative
//! `P_ij` is power sent from `j` towards `i`.
//!
//! Constraint counts are of logical constraints, where a logical constraint is
//! one [`Row`] group. The two sides of the voltage-drop and square-coupling big-M
//! pairs count separately, as does each sign condition on `y⁺`/`y⁻`; every other
//! two-sided chain (voltage box, generation and load limits, flow limits, segment
//! boxes) counts once.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{validate_network, BigMPolicy, Mode, Network, NetworkError, NsPolicy, RunConfig};
use crate::pwl::{PwlError, PwlSpec};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("no PWL bound supplied for feeder {0}")]
    MissingBound(String),
    #[error("feeder {feeder}: {source}")]
    Bound { feeder: String, source: PwlError },
    #[error("fixed island count {requested} exceeds the {available} root-capable buses")]
    TooManyIslands { requested: u32, available: usize },
    #[error("structural bug: {category} count is {actual}, expected {expected}")]
    CountMismatch { category: &'static str, expected: usize, actual: usize },
}

/// Per-feeder PWL bounds `P_ij^max`, `Q_ij^max`, aligned with `Network::feeders`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederBounds {
    pub p_max: Vec<f64>,
    pub q_max: Vec<f64>,
}

impl FeederBounds {
    pub fn uniform(n_feeders: usize, value: f64) -> Self {
        FeederBounds { p_max: vec![value; n_feeders], q_max: vec![value; n_feeders] }
    }

    pub fn len(&self) -> usize {
        self.p_max.len().min(self.q_max.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarRole {
    BusState(usize),
    FeederState(usize),
    GenP(usize),
    GenQ(usize),
    LoadP(usize),
    LoadQ(usize),
    VSqr(usize),
    FlowP(usize),
    FlowQ(usize),
    PPlus(usize),
    PMinus(usize),
    QPlus(usize),
    QMinus(usize),
    DeltaP(usize, u32),
    DeltaQ(usize, u32),
    ISqr(usize),
}

impl VarRole {
    pub fn is_binary(&self) -> bool {
        matches!(self, VarRole::BusState(_) | VarRole::FeederState(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub role: VarRole,
    pub lower: f64,
    pub upper: f64,
}

impl Variable {
    pub fn is_binary(&self) -> bool {
        self.role.is_binary()
    }

    pub fn is_fixed(&self) -> bool {
        self.lower == self.upper
    }
}

/// Constraint family a row belongs to. Rows of the segment expansion of the square
/// approximation carry `Coupling`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    BalanceP,
    BalanceQ,
    VoltageDrop,
    VoltageBox,
    CurrentLimit,
    Radiality,
    Endpoints,
    GenP,
    GenQ,
    LoadP,
    LoadQ,
    FlowP,
    FlowQ,
    Coupling,
}

impl Tag {
    pub const ALL: [Tag; 14] = [
        Tag::BalanceP,
        Tag::BalanceQ,
        Tag::VoltageDrop,
        Tag::VoltageBox,
        Tag::CurrentLimit,
        Tag::Radiality,
        Tag::Endpoints,
        Tag::GenP,
        Tag::GenQ,
        Tag::LoadP,
        Tag::LoadQ,
        Tag::FlowP,
        Tag::FlowQ,
        Tag::Coupling,
    ];

    pub fn is_power_flow(&self) -> bool {
        matches!(
            self,
            Tag::BalanceP | Tag::BalanceQ | Tag::VoltageDrop | Tag::VoltageBox | Tag::CurrentLimit | Tag::Coupling
        )
    }

    pub fn label(&self) -> &'static str {
        match self {
            Tag::BalanceP => "balp",
            Tag::BalanceQ => "balq",
            Tag::VoltageDrop => "vdrop",
            Tag::VoltageBox => "vbox",
            Tag::CurrentLimit => "ilim",
            Tag::Radiality => "radial",
            Tag::Endpoints => "ends",
            Tag::GenP => "genp",
            Tag::GenQ => "genq",
            Tag::LoadP => "loadp",
            Tag::LoadQ => "loadq",
            Tag::FlowP => "flowp",
            Tag::FlowQ => "flowq",
            Tag::Coupling => "coupling",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub tag: Tag,
    /// Logical constraint this row belongs to.
    pub group: usize,
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.relation {
            Relation::Le => (a - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - a).max(0.0),
            Relation::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub sense: Sense,
    pub terms: Vec<(usize, f64)>,
}

impl Objective {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * x[j]).sum()
    }
}

/// Column indices of one bus's variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusVars {
    pub state: usize,
    pub gen_p: usize,
    pub gen_q: usize,
    pub load_p: usize,
    pub load_q: usize,
    pub v_sqr: usize,
}

/// Column indices of one feeder's variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeederVars {
    pub state: usize,
    pub p: usize,
    pub q: usize,
    pub p_plus: usize,
    pub p_minus: usize,
    pub q_plus: usize,
    pub q_minus: usize,
    pub i_sqr: usize,
    pub delta_p: Vec<usize>,
    pub delta_q: Vec<usize>,
}

/// Big-M constants, one per row family (and per feeder where they depend on it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigM {
    pub drop: Vec<f64>,
    pub voltage: f64,
    pub current: Vec<f64>,
    pub flow_p: Vec<f64>,
    pub flow_q: Vec<f64>,
    pub coupling: Vec<f64>,
}

/// Per-row big-M constants for `policy`.
pub fn big_m_values(net: &Network, bounds: &FeederBounds, policy: BigMPolicy) -> BigM {
    let nf = net.feeders.len();
    if let BigMPolicy::Fixed(m) = policy {
        return BigM {
            drop: vec![m; nf],
            voltage: m,
            current: vec![m; nf],
            flow_p: vec![m; nf],
            flow_q: vec![m; nf],
            coupling: vec![m; nf],
        };
    }
    let (vmin2, vmax2) = (net.v_min * net.v_min, net.v_max * net.v_max);
    let mut m = BigM {
        drop: Vec::with_capacity(nf),
        voltage: vmax2,
        current: Vec::with_capacity(nf),
        flow_p: Vec::with_capacity(nf),
        flow_q: Vec::with_capacity(nf),
        coupling: Vec::with_capacity(nf),
    };
    for (k, f) in net.feeders.iter().enumerate() {
        let (pm, qm) = (bounds.p_max[k], bounds.q_max[k]);
        let i2 = f.i_max * f.i_max;
        m.drop.push((vmax2 - vmin2) + 2.0 * (f.r * pm + f.x.abs() * qm) + f.z_sqr() * i2);
        m.current.push(i2);
        m.flow_p.push(pm);
        m.flow_q.push(qm);
        m.coupling.push(pm * pm + qm * qm + vmax2 * i2);
    }
    m
}

/// Variable and constraint counts in the categories of the complexity table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelCounts {
    pub binaries: usize,
    pub continuums: usize,
    pub pf_constraints: usize,
    pub topology_constraints: usize,
}

impl ModelCounts {
    /// Closed-form counts for `n_bus` buses, `n_feeder` feeders and `lambda` segments.
    pub fn expected(n_bus: usize, n_feeder: usize, lambda: u32) -> Self {
        let l = lambda as usize;
        ModelCounts {
            binaries: n_feeder + n_bus,
            continuums: (7 + 2 * l) * n_feeder + 5 * n_bus,
            pf_constraints: (13 + 2 * l) * n_feeder + 3 * n_bus,
            topology_constraints: 3 * n_feeder + 4 * n_bus + 1,
        }
    }

    pub fn total_constraints(&self) -> usize {
        self.pf_constraints + self.topology_constraints
    }
}

/// A fully assembled instance. Carries copies of the network, configuration and
/// bounds it was built from so that backends can work from the model alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MilpModel {
    pub network: Network,
    pub config: RunConfig,
    pub bounds: FeederBounds,
    pub big_m: BigM,
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    pub objective: Objective,
    pub bus_vars: Vec<BusVars>,
    pub feeder_vars: Vec<FeederVars>,
}

fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

struct Builder {
    variables: Vec<Variable>,
    rows: Vec<Row>,
    group: usize,
}

impl Builder {
    fn var(&mut self, name: String, role: VarRole, lower: f64, upper: f64) -> usize {
        self.variables.push(Variable { name, role, lower, upper });
        self.variables.len() - 1
    }

    /// Opens a new logical constraint; rows added until the next call share it.
    fn group(&mut self) {
        self.group += 1;
    }

    fn row(&mut self, name: String, tag: Tag, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.rows.push(Row { name, tag, group: self.group, terms, relation, rhs });
    }
}

fn state_bounds(forced: Option<bool>) -> (f64, f64) {
    match forced {
        Some(true) => (1.0, 1.0),
        Some(false) => (0.0, 0.0),
        None => (0.0, 1.0),
    }
}

fn span(a: f64, b: f64) -> (f64, f64) {
    (a.min(b).min(0.0), a.max(b).max(0.0))
}

/// Builds the MILP for `net` under `cfg` with PWL bounds `bounds`.
pub fn build_model(net: &Network, cfg: &RunConfig, bounds: &FeederBounds) -> Result<MilpModel, ModelError> {
    let report = validate_network(net);
    if !report.is_empty() {
        return Err(NetworkError::Invalid(report).into());
    }
    cfg.validate()?;
    let (nb, nf) = (net.buses.len(), net.feeders.len());
    for (k, f) in net.feeders.iter().enumerate() {
        let (Some(&p), Some(&q)) = (bounds.p_max.get(k), bounds.q_max.get(k)) else {
            return Err(ModelError::MissingBound(f.id.clone()));
        };
        for b in [p, q] {
            PwlSpec::new(cfg.lambda, b).map_err(|source| ModelError::Bound { feeder: f.id.clone(), source })?;
        }
    }
    let roots = net.roots();
    if let NsPolicy::Fixed(n) = cfg.n_s {
        if n as usize > roots.len() {
            return Err(ModelError::TooManyIslands { requested: n, available: roots.len() });
        }
    }

    let m = big_m_values(net, bounds, cfg.big_m);
    let lambda = cfg.lambda;
    let (vmin2, vmax2, vn2) = (net.v_min * net.v_min, net.v_max * net.v_max, net.v_norm * net.v_norm);
    let mut b = Builder { variables: Vec::new(), rows: Vec::new(), group: 0 };

    let mut bus_vars = Vec::with_capacity(nb);
    for bus in &net.buses {
        let id = sanitize(&bus.id);
        let forced = match cfg.mode {
            Mode::Reconfiguration => Some(true),
            Mode::Restoration => bus.fixed_state,
        };
        let (lo, hi) = state_bounds(forced);
        let state = b.var(format!("v_{id}"), VarRole::BusState(bus_vars.len()), lo, hi);
        let i = bus_vars.len();
        let (gp0, gp1) = span(bus.gen_p_min, bus.gen_p_max);
        let (gq0, gq1) = span(bus.gen_q_min, bus.gen_q_max);
        let (lp0, lp1) = span(bus.load_p, bus.load_p);
        let (lq0, lq1) = span(bus.load_q, bus.load_q);
        bus_vars.push(BusVars {
            state,
            gen_p: b.var(format!("PG_{id}"), VarRole::GenP(i), gp0, gp1),
            gen_q: b.var(format!("QG_{id}"), VarRole::GenQ(i), gq0, gq1),
            load_p: b.var(format!("PL_{id}"), VarRole::LoadP(i), lp0, lp1),
            load_q: b.var(format!("QL_{id}"), VarRole::LoadQ(i), lq0, lq1),
            v_sqr: b.var(format!("V_{id}"), VarRole::VSqr(i), 0.0, vmax2 + m.voltage),
        });
    }

    let mut feeder_vars = Vec::with_capacity(nf);
    for (k, f) in net.feeders.iter().enumerate() {
        let id = sanitize(&f.id);
        let (lo, hi) = state_bounds(f.forced_state());
        let (pm, qm) = (bounds.p_max[k], bounds.q_max[k]);
        let (wp, wq) = (pm / lambda as f64, qm / lambda as f64);
        let state = b.var(format!("w_{id}"), VarRole::FeederState(k), lo, hi);
        let p = b.var(format!("P_{id}"), VarRole::FlowP(k), -m.flow_p[k], m.flow_p[k]);
        let q = b.var(format!("Q_{id}"), VarRole::FlowQ(k), -m.flow_q[k], m.flow_q[k]);
        let p_plus = b.var(format!("Pp_{id}"), VarRole::PPlus(k), 0.0, pm);
        let p_minus = b.var(format!("Pm_{id}"), VarRole::PMinus(k), 0.0, pm);
        let q_plus = b.var(format!("Qp_{id}"), VarRole::QPlus(k), 0.0, qm);
        let q_minus = b.var(format!("Qm_{id}"), VarRole::QMinus(k), 0.0, qm);
        let delta_p = (1..=lambda).map(|s| b.var(format!("DP_{id}_{s}"), VarRole::DeltaP(k, s), 0.0, wp)).collect();
        let delta_q = (1..=lambda).map(|s| b.var(format!("DQ_{id}_{s}"), VarRole::DeltaQ(k, s), 0.0, wq)).collect();
        let i_sqr = b.var(format!("I_{id}"), VarRole::ISqr(k), 0.0, f.i_max * f.i_max + m.current[k]);
        feeder_vars.push(FeederVars { state, p, q, p_plus, p_minus, q_plus, q_minus, i_sqr, delta_p, delta_q });
    }

    // Power balance.
    for (i, bus) in net.buses.iter().enumerate() {
        let id = sanitize(&bus.id);
        let bv = bus_vars[i];
        for (tag, active) in [(Tag::BalanceP, true), (Tag::BalanceQ, false)] {
            let mut terms = Vec::new();
            for (k, f) in net.feeders.iter().enumerate() {
                let (from, to) = net.endpoints(k);
                let fv = &feeder_vars[k];
                let flow = if active { fv.p } else { fv.q };
                if to == i {
                    terms.push((flow, 1.0));
                }
                if from == i {
                    terms.push((flow, -1.0));
                    terms.push((fv.i_sqr, -(if active { f.r } else { f.x })));
                }
            }
            if active {
                terms.extend([(bv.gen_p, 1.0), (bv.load_p, -1.0)]);
            } else {
                terms.extend([(bv.gen_q, 1.0), (bv.load_q, -1.0)]);
            }
            b.group();
            b.row(format!("{tag}_{id}"), tag, terms, Relation::Eq, 0.0);
        }
    }

    // Voltage box, relaxed when the bus is off.
    for (i, bus) in net.buses.iter().enumerate() {
        let id = sanitize(&bus.id);
        let bv = bus_vars[i];
        b.group();
        b.row(
            format!("vboxlo_{id}"),
            Tag::VoltageBox,
            vec![(bv.v_sqr, 1.0), (bv.state, -m.voltage)],
            Relation::Ge,
            vmin2 - m.voltage,
        );
        b.row(
            format!("vboxup_{id}"),
            Tag::VoltageBox,
            vec![(bv.v_sqr, 1.0), (bv.state, m.voltage)],
            Relation::Le,
            vmax2 + m.voltage,
        );
    }

    for (k, f) in net.feeders.iter().enumerate() {
        let id = sanitize(&f.id);
        let (from, to) = net.endpoints(k);
        let fv = feeder_vars[k].clone();
        let drop = vec![
            (bus_vars[from].v_sqr, 1.0),
            (bus_vars[to].v_sqr, -1.0),
            (fv.p, -2.0 * f.r),
            (fv.q, -2.0 * f.x),
            (fv.i_sqr, -f.z_sqr()),
        ];
        let with_state = |mut t: Vec<(usize, f64)>, c: f64| {
            t.push((fv.state, c));
            t
        };
        b.group();
        b.row(
            format!("vdroplo_{id}"),
            Tag::VoltageDrop,
            with_state(drop.clone(), -m.drop[k]),
            Relation::Ge,
            -m.drop[k],
        );
        b.group();
        b.row(format!("vdropup_{id}"), Tag::VoltageDrop, with_state(drop, m.drop[k]), Relation::Le, m.drop[k]);

        b.group();
        b.row(
            format!("ilim_{id}"),
            Tag::CurrentLimit,
            vec![(fv.i_sqr, 1.0), (fv.state, m.current[k])],
            Relation::Le,
            f.i_max * f.i_max + m.current[k],
        );

        // vn²·I − f(P) − f(Q), switched by w.
        let pspec = PwlSpec::new(lambda, bounds.p_max[k]).expect("checked above");
        let qspec = PwlSpec::new(lambda, bounds.q_max[k]).expect("checked above");
        let mut coupling = vec![(fv.i_sqr, vn2)];
        coupling.extend(fv.delta_p.iter().zip(pspec.slopes()).map(|(&d, s)| (d, -s)));
        coupling.extend(fv.delta_q.iter().zip(qspec.slopes()).map(|(&d, s)| (d, -s)));
        b.group();
        b.row(
            format!("couplinglo_{id}"),
            Tag::Coupling,
            with_state(coupling.clone(), -m.coupling[k]),
            Relation::Ge,
            -m.coupling[k],
        );
        b.group();
        b.row(
            format!("couplingup_{id}"),
            Tag::Coupling,
            with_state(coupling, m.coupling[k]),
            Relation::Le,
            m.coupling[k],
        );

        for (name, y, plus, minus, deltas, spec) in [
            ("P", fv.p, fv.p_plus, fv.p_minus, &fv.delta_p, pspec),
            ("Q", fv.q, fv.q_plus, fv.q_minus, &fv.delta_q, qspec),
        ] {
            b.group();
            b.row(
                format!("split{name}_{id}"),
                Tag::Coupling,
                vec![(y, 1.0), (plus, -1.0), (minus, 1.0)],
                Relation::Eq,
                0.0,
            );
            let mut fill = vec![(plus, 1.0), (minus, 1.0)];
            fill.extend(deltas.iter().map(|&d| (d, -1.0)));
            b.group();
            b.row(format!("fill{name}_{id}"), Tag::Coupling, fill, Relation::Eq, 0.0);
            for (s, &d) in deltas.iter().enumerate() {
                b.group();
                b.row(format!("seg{name}lo_{id}_{}", s + 1), Tag::Coupling, vec![(d, 1.0)], Relation::Ge, 0.0);
                b.row(
                    format!("seg{name}up_{id}_{}", s + 1),
                    Tag::Coupling,
                    vec![(d, 1.0)],
                    Relation::Le,
                    spec.segment_width(),
                );
            }
            b.group();
            b.row(format!("pos{name}_{id}"), Tag::Coupling, vec![(plus, 1.0)], Relation::Ge, 0.0);
            b.group();
            b.row(format!("neg{name}_{id}"), Tag::Coupling, vec![(minus, 1.0)], Relation::Ge, 0.0);
        }
    }

    // Radiality counting row: Σw = Σv − N_s.
    {
        let mut terms: Vec<(usize, f64)> = feeder_vars.iter().map(|fv| (fv.state, 1.0)).collect();
        let rhs = match cfg.n_s {
            NsPolicy::Fixed(n) => {
                terms.extend(bus_vars.iter().map(|bv| (bv.state, -1.0)));
                -(n as f64)
            }
            NsPolicy::EnergizedRoots => {
                terms.extend(
                    net.buses.iter().zip(&bus_vars).filter(|(bus, _)| !bus.is_root).map(|(_, bv)| (bv.state, -1.0)),
                );
                0.0
            }
        };
        b.group();
        b.row("radial".to_string(), Tag::Radiality, terms, Relation::Eq, rhs);
    }

    for (k, f) in net.feeders.iter().enumerate() {
        let (from, to) = net.endpoints(k);
        b.group();
        b.row(
            format!("ends_{}", sanitize(&f.id)),
            Tag::Endpoints,
            vec![(bus_vars[from].state, 1.0), (bus_vars[to].state, 1.0), (feeder_vars[k].state, -2.0)],
            Relation::Ge,
            0.0,
        );
    }

    for (i, bus) in net.buses.iter().enumerate() {
        let id = sanitize(&bus.id);
        let bv = bus_vars[i];
        for (tag, var, lo, hi) in [
            (Tag::GenP, bv.gen_p, bus.gen_p_min, bus.gen_p_max),
            (Tag::GenQ, bv.gen_q, bus.gen_q_min, bus.gen_q_max),
            (Tag::LoadP, bv.load_p, bus.load_p, bus.load_p),
            (Tag::LoadQ, bv.load_q, bus.load_q, bus.load_q),
        ] {
            b.group();
            b.row(format!("{tag}lo_{id}"), tag, vec![(var, 1.0), (bv.state, -lo)], Relation::Ge, 0.0);
            b.row(format!("{tag}up_{id}"), tag, vec![(var, 1.0), (bv.state, -hi)], Relation::Le, 0.0);
        }
    }

    for (k, f) in net.feeders.iter().enumerate() {
        let id = sanitize(&f.id);
        let fv = &feeder_vars[k];
        for (tag, var, big) in [(Tag::FlowP, fv.p, m.flow_p[k]), (Tag::FlowQ, fv.q, m.flow_q[k])] {
            b.group();
            b.row(format!("{tag}lo_{id}"), tag, vec![(var, 1.0), (fv.state, big)], Relation::Ge, 0.0);
            b.row(format!("{tag}up_{id}"), tag, vec![(var, 1.0), (fv.state, -big)], Relation::Le, 0.0);
        }
    }

    let objective = match cfg.mode {
        Mode::Reconfiguration => Objective {
            sense: Sense::Minimize,
            terms: net.feeders.iter().zip(&feeder_vars).map(|(f, fv)| (fv.i_sqr, f.r)).collect(),
        },
        Mode::Restoration => {
            Objective { sense: Sense::Maximize, terms: bus_vars.iter().map(|bv| (bv.load_p, 1.0)).collect() }
        }
    };

    Ok(MilpModel {
        network: net.clone(),
        config: cfg.clone(),
        bounds: bounds.clone(),
        big_m: m,
        variables: b.variables,
        rows: b.rows,
        objective,
        bus_vars,
        feeder_vars,
    })
}

impl MilpModel {
    pub fn lambda(&self) -> u32 {
        self.config.lambda
    }

    pub fn num_groups(&self) -> usize {
        let mut groups: Vec<usize> = self.rows.iter().map(|r| r.group).collect();
        groups.dedup();
        groups.len()
    }

    /// Logical constraint count per provenance tag.
    pub fn count_by_tag(&self) -> BTreeMap<Tag, usize> {
        let mut out: BTreeMap<Tag, usize> = Tag::ALL.iter().map(|&t| (t, 0)).collect();
        let mut last = None;
        for row in &self.rows {
            if last != Some(row.group) {
                *out.entry(row.tag).or_default() += 1;
                last = Some(row.group);
            }
        }
        out
    }

    pub fn binary_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.variables.iter().enumerate().filter(|(_, v)| v.is_binary()).map(|(j, _)| j)
    }

    /// Largest row violation at `x`, with the offending row index.
    pub fn max_violation(&self, x: &[f64]) -> (f64, Option<usize>) {
        self.rows.iter().enumerate().map(|(r, row)| (row.violation(x), Some(r))).fold((0.0, None), |acc, cur| {
            if cur.0 > acc.0 {
                cur
            } else {
                acc
            }
        })
    }

    /// Largest violation of the column bounds at `x`.
    pub fn max_bound_violation(&self, x: &[f64]) -> f64 {
        self.variables.iter().zip(x).map(|(v, &val)| (v.lower - val).max(val - v.upper).max(0.0)).fold(0.0, f64::max)
    }

    /// Rows violated by more than `tol` at `x`.
    pub fn violations(&self, x: &[f64], tol: f64) -> Vec<(&Row, f64)> {
        self.rows.iter().map(|r| (r, r.violation(x))).filter(|(_, v)| *v > tol).collect()
    }

    /// Text dump in the CPLEX LP exchange format, with provenance comments.
    pub fn write_lp<W: Write>(&self, mut out: W) -> io::Result<()> {
        let term = |c: f64, j: usize| {
            let sign = if c < 0.0 { "-" } else { "+" };
            format!(" {sign} {} {}", c.abs(), self.variables[j].name)
        };
        writeln!(
            out,
            "\\ load pick-up MILP: {} ({:?}, lambda = {})",
            self.network.name,
            self.config.mode,
            self.lambda()
        )?;
        writeln!(
            out,
            "{}",
            match self.objective.sense {
                Sense::Minimize => "Minimize",
                Sense::Maximize => "Maximize",
            }
        )?;
        let obj: String = self.objective.terms.iter().map(|&(j, c)| term(c, j)).collect();
        writeln!(out, " obj:{}", if obj.is_empty() { " 0 v_dummy".to_string() } else { obj })?;
        writeln!(out, "Subject To")?;
        let mut last_tag = None;
        for row in &self.rows {
            if last_tag != Some(row.tag) {
                writeln!(out, "\\ {}", row.tag)?;
                last_tag = Some(row.tag);
            }
            let lhs: String = row.terms.iter().map(|&(j, c)| term(c, j)).collect();
            let rel = match row.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            writeln!(out, " {}:{} {} {}", row.name, lhs, rel, row.rhs)?;
        }
        writeln!(out, "Bounds")?;
        for v in &self.variables {
            if v.is_fixed() {
                writeln!(out, " {} = {}", v.name, v.lower)?;
            } else {
                writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper)?;
            }
        }
        writeln!(out, "Binaries")?;
        for v in self.variables.iter().filter(|v| v.is_binary()) {
            writeln!(out, " {}", v.name)?;
        }
        writeln!(out, "End")
    }
}

/// Counts the model's variables and logical constraints and checks them against the
/// closed-form expectations.
pub fn count_model(model: &MilpModel) -> Result<ModelCounts, ModelError> {
    let binaries = model.variables.iter().filter(|v| v.is_binary()).count();
    let continuums = model.variables.len() - binaries;
    let by_tag = model.count_by_tag();
    let pf_constraints = by_tag.iter().filter(|(t, _)| t.is_power_flow()).map(|(_, n)| n).sum();
    let topology_constraints = by_tag.iter().filter(|(t, _)| !t.is_power_flow()).map(|(_, n)| n).sum();
    let counts = ModelCounts { binaries, continuums, pf_constraints, topology_constraints };
    let expected = ModelCounts::expected(model.network.buses.len(), model.network.feeders.len(), model.lambda());
    for (category, actual, want) in [
        ("binary variable", counts.binaries, expected.binaries),
        ("continuous variable", counts.continuums, expected.continuums),
        ("power-flow constraint", counts.pf_constraints, expected.pf_constraints),
        ("topology constraint", counts.topology_constraints, expected.topology_constraints),
    ] {
        if actual != want {
            return Err(ModelError::CountMismatch { category, expected: want, actual });
        }
    }
    Ok(counts)
}

/// Expected logical-constraint count per tag.
pub fn expected_tag_counts(n_bus: usize, n_feeder: usize, lambda: u32) -> BTreeMap<Tag, usize> {
    let l = lambda as usize;
    BTreeMap::from([
        (Tag::BalanceP, n_bus),
        (Tag::BalanceQ, n_bus),
        (Tag::VoltageDrop, 2 * n_feeder),
        (Tag::VoltageBox, n_bus),
        (Tag::CurrentLimit, n_feeder),
        (Tag::Radiality, 1),
        (Tag::Endpoints, n_feeder),
        (Tag::GenP, n_bus),
        (Tag::GenQ, n_bus),
        (Tag::LoadP, n_bus),
        (Tag::LoadQ, n_bus),
        (Tag::FlowP, n_feeder),
        (Tag::FlowQ, n_feeder),
        (Tag::Coupling, (10 + 2 * l) * n_feeder),
    ])
}
