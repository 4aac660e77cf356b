//! Typed distribution-network description and run configuration.
//!
//! All quantities held by [`Network`] are per-unit on a three-phase MVA base with a
//! line-to-line kV base. Conversion from engineering units happens once, in
//! [`per_unit_ingest`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("base values must be positive (base_mva = {base_mva}, base_kv = {base_kv})")]
    NonPositiveBase { base_mva: f64, base_kv: f64 },
    #[error("network failed validation:\n{0}")]
    Invalid(ValidationReport),
    #[error("invalid run configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    /// May head an energized tree (substation connection or grid-forming DG).
    pub is_root: bool,
    pub load_p: f64,
    pub load_q: f64,
    pub gen_p_min: f64,
    pub gen_p_max: f64,
    pub gen_q_min: f64,
    pub gen_q_max: f64,
    /// `Some(true)` forces the bus energized, `Some(false)` de-energized.
    pub fixed_state: Option<bool>,
}

impl Bus {
    pub fn load(id: impl Into<String>, p: f64, q: f64) -> Self {
        Bus {
            id: id.into(),
            is_root: false,
            load_p: p,
            load_q: q,
            gen_p_min: 0.0,
            gen_p_max: 0.0,
            gen_q_min: 0.0,
            gen_q_max: 0.0,
            fixed_state: None,
        }
    }

    pub fn root(id: impl Into<String>, p_range: (f64, f64), q_range: (f64, f64)) -> Self {
        Bus {
            is_root: true,
            gen_p_min: p_range.0,
            gen_p_max: p_range.1,
            gen_q_min: q_range.0,
            gen_q_max: q_range.1,
            ..Bus::load(id, 0.0, 0.0)
        }
    }

    pub fn has_generation(&self) -> bool {
        self.gen_p_max > 0.0 || self.gen_q_min != 0.0 || self.gen_q_max != 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feeder {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub r: f64,
    pub x: f64,
    pub i_max: f64,
    pub switchable: bool,
    pub fixed_state: Option<bool>,
}

impl Feeder {
    pub fn new(
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        r: f64,
        x: f64,
        i_max: f64,
    ) -> Self {
        Feeder {
            id: id.into(),
            from_bus: from.into(),
            to_bus: to.into(),
            r,
            x,
            i_max,
            switchable: true,
            fixed_state: None,
        }
    }

    /// Impedance magnitude; only used for validation.
    pub fn z(&self) -> f64 {
        self.r.hypot(self.x)
    }

    pub fn z_sqr(&self) -> f64 {
        self.r * self.r + self.x * self.x
    }

    /// The state this feeder is held at, if any. Non-switchable feeders stay closed
    /// unless the file pins them open.
    pub fn forced_state(&self) -> Option<bool> {
        match (self.fixed_state, self.switchable) {
            (Some(s), _) => Some(s),
            (None, false) => Some(true),
            (None, true) => None,
        }
    }
}

/// Immutable per-unit network. Construct through [`Network::new`], which builds the
/// id indices; the invariants themselves are checked by [`validate_network`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "NetworkData", into = "NetworkData")]
pub struct Network {
    pub name: String,
    pub buses: Vec<Bus>,
    pub feeders: Vec<Feeder>,
    pub v_norm: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub base_mva: f64,
    pub base_kv: f64,
    bus_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct NetworkData {
    name: String,
    buses: Vec<Bus>,
    feeders: Vec<Feeder>,
    v_norm: f64,
    v_min: f64,
    v_max: f64,
    base_mva: f64,
    base_kv: f64,
}

impl From<NetworkData> for Network {
    fn from(d: NetworkData) -> Self {
        Network::new(d.name, d.buses, d.feeders, (d.v_min, d.v_norm, d.v_max), (d.base_mva, d.base_kv))
    }
}

impl From<Network> for NetworkData {
    fn from(n: Network) -> Self {
        NetworkData {
            name: n.name,
            buses: n.buses,
            feeders: n.feeders,
            v_norm: n.v_norm,
            v_min: n.v_min,
            v_max: n.v_max,
            base_mva: n.base_mva,
            base_kv: n.base_kv,
        }
    }
}

impl Network {
    /// `voltage` is `(v_min, v_norm, v_max)`, `base` is `(base_mva, base_kv)`.
    pub fn new(
        name: impl Into<String>,
        buses: Vec<Bus>,
        feeders: Vec<Feeder>,
        voltage: (f64, f64, f64),
        base: (f64, f64),
    ) -> Self {
        let mut bus_index = HashMap::with_capacity(buses.len());
        for (i, b) in buses.iter().enumerate() {
            bus_index.entry(b.id.clone()).or_insert(i);
        }
        Network {
            name: name.into(),
            buses,
            feeders,
            v_min: voltage.0,
            v_norm: voltage.1,
            v_max: voltage.2,
            base_mva: base.0,
            base_kv: base.1,
            bus_index,
        }
    }

    pub fn bus_idx(&self, id: &str) -> Option<usize> {
        self.bus_index.get(id).copied()
    }

    pub fn feeder_idx(&self, id: &str) -> Option<usize> {
        self.feeders.iter().position(|f| f.id == id)
    }

    /// Endpoint indices `(from, to)` of feeder `f`.
    ///
    /// Panics if an endpoint is unknown; callers work on validated networks.
    pub fn endpoints(&self, f: usize) -> (usize, usize) {
        let feeder = &self.feeders[f];
        let from = self.bus_idx(&feeder.from_bus).unwrap_or_else(|| panic!("unknown bus {}", feeder.from_bus));
        let to = self.bus_idx(&feeder.to_bus).unwrap_or_else(|| panic!("unknown bus {}", feeder.to_bus));
        (from, to)
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.buses.len()).filter(|&i| self.buses[i].is_root).collect()
    }

    pub fn switchable_count(&self) -> usize {
        self.feeders.iter().filter(|f| f.forced_state().is_none()).count()
    }

    pub fn total_load_p(&self) -> f64 {
        self.buses.iter().map(|b| b.load_p).sum()
    }

    /// Copy with bus `id` pinned to `state`.
    pub fn with_bus_state(&self, id: &str, state: Option<bool>) -> Option<Network> {
        let i = self.bus_idx(id)?;
        let mut net = self.clone();
        net.buses[i].fixed_state = state;
        Some(net)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IssueKind {
    DuplicateBus,
    DuplicateFeeder,
    ParallelFeeder,
    UnknownEndpoint,
    SelfLoop,
    ZeroImpedance,
    NegativeResistance,
    NonPositiveCurrentLimit,
    NonFinite,
    GenerationBounds,
    NegativeLoad,
    VoltageBounds,
    NoRoot,
    RootlessComponent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub kind: IssueKind,
    /// Offending bus or feeder id (network name for global issues).
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn mentions(&self, kind: IssueKind, subject: &str) -> bool {
        self.issues.iter().any(|i| i.kind == kind && i.subject == subject)
    }

    fn push(&mut self, kind: IssueKind, subject: &str, message: String) {
        self.issues.push(Issue { kind, subject: subject.to_string(), message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "  [{:?}] {}: {}", issue.kind, issue.subject, issue.message)?;
        }
        Ok(())
    }
}

/// Checks every structural and physical invariant of `net` and lists all violations.
pub fn validate_network(net: &Network) -> ValidationReport {
    let mut report = ValidationReport::default();
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());

    if !(finite(&[net.v_min, net.v_norm, net.v_max])
        && 0.0 < net.v_min
        && net.v_min <= net.v_norm
        && net.v_norm <= net.v_max)
    {
        report.push(
            IssueKind::VoltageBounds,
            &net.name,
            format!("need 0 < v_min <= v_norm <= v_max, got {} / {} / {}", net.v_min, net.v_norm, net.v_max),
        );
    }

    let mut seen = HashSet::new();
    for b in &net.buses {
        if !seen.insert(b.id.as_str()) {
            report.push(IssueKind::DuplicateBus, &b.id, "duplicate bus id".into());
        }
        if !finite(&[b.load_p, b.load_q, b.gen_p_min, b.gen_p_max, b.gen_q_min, b.gen_q_max]) {
            report.push(IssueKind::NonFinite, &b.id, "non-finite bus parameter".into());
            continue;
        }
        if b.gen_p_min > b.gen_p_max || b.gen_q_min > b.gen_q_max {
            report.push(IssueKind::GenerationBounds, &b.id, "generation lower bound exceeds upper bound".into());
        }
        if b.load_p < 0.0 {
            report.push(IssueKind::NegativeLoad, &b.id, format!("active load {} is negative", b.load_p));
        }
    }
    if !net.buses.iter().any(|b| b.is_root) {
        report.push(IssueKind::NoRoot, &net.name, "no root-capable bus".into());
    }

    let mut feeder_ids = HashSet::new();
    let mut pairs = HashSet::new();
    for f in &net.feeders {
        if !feeder_ids.insert(f.id.as_str()) {
            report.push(IssueKind::DuplicateFeeder, &f.id, "duplicate feeder id".into());
        }
        for end in [&f.from_bus, &f.to_bus] {
            if net.bus_idx(end).is_none() {
                report.push(IssueKind::UnknownEndpoint, &f.id, format!("endpoint {end} does not exist"));
            }
        }
        if f.from_bus == f.to_bus {
            report.push(IssueKind::SelfLoop, &f.id, "from_bus equals to_bus".into());
        } else {
            let key = if f.from_bus < f.to_bus { (&f.from_bus, &f.to_bus) } else { (&f.to_bus, &f.from_bus) };
            if !pairs.insert(key) {
                report.push(IssueKind::ParallelFeeder, &f.id, format!("second feeder between {} and {}", key.0, key.1));
            }
        }
        if !finite(&[f.r, f.x, f.i_max]) {
            report.push(IssueKind::NonFinite, &f.id, "non-finite feeder parameter".into());
            continue;
        }
        if f.r < 0.0 {
            report.push(IssueKind::NegativeResistance, &f.id, format!("resistance {} is negative", f.r));
        }
        if f.z() <= 0.0 {
            report.push(IssueKind::ZeroImpedance, &f.id, "zero impedance (r = x = 0)".into());
        }
        if f.i_max <= 0.0 {
            report.push(IssueKind::NonPositiveCurrentLimit, &f.id, format!("i_max {} must be positive", f.i_max));
        }
    }

    // Every connected component of the full feeder graph must hold a root, otherwise
    // no rooted spanning forest exists.
    let n = net.buses.len();
    let mut dsu = Dsu::new(n);
    for f in &net.feeders {
        if let (Some(a), Some(b)) = (net.bus_idx(&f.from_bus), net.bus_idx(&f.to_bus)) {
            dsu.union(a, b);
        }
    }
    let mut rooted: BTreeMap<usize, bool> = BTreeMap::new();
    for (i, b) in net.buses.iter().enumerate() {
        *rooted.entry(dsu.find(i)).or_insert(false) |= b.is_root;
    }
    if net.buses.iter().any(|b| b.is_root) {
        // The union keeps the smallest index as representative, so `rep == i` picks
        // the first bus of each component.
        for (i, b) in net.buses.iter().enumerate() {
            let rep = dsu.find(i);
            if rep == i && !rooted[&rep] {
                report.push(
                    IssueKind::RootlessComponent,
                    &b.id,
                    "component containing this bus has no root-capable bus".into(),
                );
            }
        }
    }
    report
}

/// Disjoint-set union with path halving; shared with the enumerator and oracle.
#[derive(Debug, Clone)]
pub(crate) struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    /// Returns false when `a` and `b` were already connected.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

/// Three-phase per-unit base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerUnitBase {
    pub base_mva: f64,
    pub base_kv: f64,
}

impl PerUnitBase {
    pub fn new(base_mva: f64, base_kv: f64) -> Result<Self, NetworkError> {
        if !(base_mva > 0.0 && base_kv > 0.0 && base_mva.is_finite() && base_kv.is_finite()) {
            return Err(NetworkError::NonPositiveBase { base_mva, base_kv });
        }
        Ok(PerUnitBase { base_mva, base_kv })
    }

    /// Line current base in amperes.
    pub fn i_base_amps(&self) -> f64 {
        self.base_mva * 1e6 / (3f64.sqrt() * self.base_kv * 1e3)
    }

    pub fn z_base_ohms(&self) -> f64 {
        self.base_kv * self.base_kv / self.base_mva
    }

    pub fn power_to_pu(&self, mw: f64) -> f64 {
        mw / self.base_mva
    }

    pub fn power_from_pu(&self, pu: f64) -> f64 {
        pu * self.base_mva
    }

    pub fn current_to_pu(&self, amps: f64) -> f64 {
        amps / self.i_base_amps()
    }

    pub fn current_from_pu(&self, pu: f64) -> f64 {
        pu * self.i_base_amps()
    }

    pub fn impedance_to_pu(&self, ohms: f64) -> f64 {
        ohms / self.z_base_ohms()
    }

    pub fn impedance_from_pu(&self, pu: f64) -> f64 {
        pu * self.z_base_ohms()
    }
}

/// Engineering-unit description: MW/Mvar powers, ohm impedances, ampere limits.
#[derive(Debug, Clone, PartialEq)]
pub struct RawNetwork {
    pub name: String,
    pub base_mva: f64,
    pub base_kv: f64,
    pub v_norm: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub buses: Vec<Bus>,
    pub feeders: Vec<Feeder>,
}

/// Converts a raw engineering-unit description into the per-unit [`Network`].
pub fn per_unit_ingest(raw: &RawNetwork) -> Result<Network, NetworkError> {
    let base = PerUnitBase::new(raw.base_mva, raw.base_kv)?;
    let buses = raw
        .buses
        .iter()
        .map(|b| Bus {
            load_p: base.power_to_pu(b.load_p),
            load_q: base.power_to_pu(b.load_q),
            gen_p_min: base.power_to_pu(b.gen_p_min),
            gen_p_max: base.power_to_pu(b.gen_p_max),
            gen_q_min: base.power_to_pu(b.gen_q_min),
            gen_q_max: base.power_to_pu(b.gen_q_max),
            ..b.clone()
        })
        .collect();
    let feeders = raw
        .feeders
        .iter()
        .map(|f| Feeder {
            r: base.impedance_to_pu(f.r),
            x: base.impedance_to_pu(f.x),
            i_max: base.current_to_pu(f.i_max),
            ..f.clone()
        })
        .collect();
    Ok(Network::new(raw.name.clone(), buses, feeders, (raw.v_min, raw.v_norm, raw.v_max), (raw.base_mva, raw.base_kv)))
}

/// Inverse of [`per_unit_ingest`].
pub fn to_engineering(net: &Network) -> Result<RawNetwork, NetworkError> {
    let base = PerUnitBase::new(net.base_mva, net.base_kv)?;
    Ok(RawNetwork {
        name: net.name.clone(),
        base_mva: net.base_mva,
        base_kv: net.base_kv,
        v_norm: net.v_norm,
        v_min: net.v_min,
        v_max: net.v_max,
        buses: net
            .buses
            .iter()
            .map(|b| Bus {
                load_p: base.power_from_pu(b.load_p),
                load_q: base.power_from_pu(b.load_q),
                gen_p_min: base.power_from_pu(b.gen_p_min),
                gen_p_max: base.power_from_pu(b.gen_p_max),
                gen_q_min: base.power_from_pu(b.gen_q_min),
                gen_q_max: base.power_from_pu(b.gen_q_max),
                ..b.clone()
            })
            .collect(),
        feeders: net
            .feeders
            .iter()
            .map(|f| Feeder {
                r: base.impedance_from_pu(f.r),
                x: base.impedance_from_pu(f.x),
                i_max: base.current_from_pu(f.i_max),
                ..f.clone()
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Serve every load, minimize feeder losses.
    Reconfiguration,
    /// Maximize restored active load.
    Restoration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BigMPolicy {
    /// Per-row constants derived from variable boxes.
    Tight,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NsPolicy {
    Fixed(u32),
    /// Island count equals the number of energized root-capable buses.
    EnergizedRoots,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub lambda: u32,
    /// Threshold on the mean active-power error index, percent.
    pub eps_p: f64,
    /// Threshold on the mean reactive-power error index, percent.
    pub eps_q: f64,
    pub max_iters: u32,
    pub mip_gap: f64,
    pub big_m: BigMPolicy,
    pub n_s: NsPolicy,
    /// Squared flows below this are excluded from the error indices (pu²).
    pub denom_floor: f64,
}

impl RunConfig {
    /// Defaults follow the 13-bus case-study protocol: Λ = 10, 0.1 % thresholds,
    /// five iterations, 0.01 % optimality gap.
    pub fn new(mode: Mode) -> Self {
        RunConfig {
            mode,
            lambda: 10,
            eps_p: 0.1,
            eps_q: 0.1,
            max_iters: 5,
            mip_gap: 1e-4,
            big_m: BigMPolicy::Tight,
            n_s: match mode {
                Mode::Reconfiguration => NsPolicy::Fixed(1),
                Mode::Restoration => NsPolicy::EnergizedRoots,
            },
            denom_floor: 1e-8,
        }
    }

    pub fn reconfiguration() -> Self {
        Self::new(Mode::Reconfiguration)
    }

    pub fn restoration() -> Self {
        Self::new(Mode::Restoration)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: &str| Err(NetworkError::Config(m.to_string()));
        if self.lambda < 1 {
            return bad("lambda must be >= 1");
        }
        if !(self.eps_p > 0.0 && self.eps_q > 0.0) {
            return bad("error thresholds must be positive");
        }
        if self.mip_gap.is_nan() || self.mip_gap < 0.0 {
            return bad("mip_gap must be >= 0");
        }
        if let BigMPolicy::Fixed(m) = self.big_m {
            if !(m > 0.0 && m.is_finite()) {
                return bad("fixed big-M must be positive and finite");
            }
        }
        if self.denom_floor.is_nan() || self.denom_floor < 0.0 {
            return bad("denom_floor must be >= 0");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn line3() -> Network {
        Network::new(
            "line3",
            vec![Bus::root("s", (0.0, 5.0), (-5.0, 5.0)), Bus::load("a", 0.1, 0.05), Bus::load("b", 0.2, 0.1)],
            vec![Feeder::new("f1", "s", "a", 0.01, 0.01, 2.0), Feeder::new("f2", "a", "b", 0.01, 0.01, 2.0)],
            (0.95, 1.0, 1.05),
            (1.0, 6.6),
        )
    }

    #[test]
    fn well_formed_line_validates() {
        assert!(validate_network(&line3()).is_empty());
    }

    #[test]
    fn zero_impedance_is_named() {
        let mut net = line3();
        net.feeders[1].r = 0.0;
        net.feeders[1].x = 0.0;
        let report = validate_network(&net);
        assert!(report.mentions(IssueKind::ZeroImpedance, "f2"), "{report}");
        assert_eq!(report.issues.len(), 1);
    }

    #[test]
    fn reports_every_violation() {
        let mut net = line3();
        net.buses[1].gen_p_min = 1.0;
        net.feeders[0].i_max = 0.0;
        net.feeders.push(Feeder::new("f3", "b", "a", 0.01, 0.0, 1.0));
        net.feeders.push(Feeder::new("f4", "b", "zz", 0.01, 0.0, 1.0));
        let net = Network::new(net.name, net.buses, net.feeders, (0.95, 1.0, 1.05), (1.0, 6.6));
        let report = validate_network(&net);
        assert!(report.mentions(IssueKind::GenerationBounds, "a"));
        assert!(report.mentions(IssueKind::NonPositiveCurrentLimit, "f1"));
        assert!(report.mentions(IssueKind::ParallelFeeder, "f3"));
        assert!(report.mentions(IssueKind::UnknownEndpoint, "f4"));
    }

    #[test]
    fn rootless_island_is_flagged() {
        let mut net = line3();
        net.buses.push(Bus::load("lonely", 0.1, 0.0));
        let net = Network::new(net.name, net.buses, net.feeders, (0.95, 1.0, 1.05), (1.0, 6.6));
        let report = validate_network(&net);
        assert!(report.mentions(IssueKind::RootlessComponent, "lonely"), "{report}");
    }

    #[test]
    fn voltage_box_checked() {
        let mut net = line3();
        net.v_min = 1.02;
        assert!(validate_network(&net).mentions(IssueKind::VoltageBounds, "line3"));
    }

    #[test]
    fn validation_is_pure() {
        let mut net = line3();
        net.feeders[0].x = f64::NAN;
        assert_eq!(validate_network(&net), validate_network(&net));
    }

    #[test]
    fn per_unit_table_values() {
        let base = PerUnitBase::new(1.0, 6.6).unwrap();
        assert_eq!(base.power_to_pu(0.2420), 0.2420);
        assert!((base.i_base_amps() - 87.477).abs() < 1e-3);
        let i = base.current_to_pu(250.0);
        assert!((i - 2.8579).abs() < 5e-5, "{i}");
        assert_eq!(base.impedance_to_pu(0.0), 0.0);
    }

    #[test]
    fn nonpositive_base_rejected() {
        assert!(PerUnitBase::new(0.0, 6.6).is_err());
        assert!(PerUnitBase::new(1.0, -1.0).is_err());
    }

    #[test]
    fn ingest_round_trip() {
        let raw = RawNetwork {
            name: "r".into(),
            base_mva: 10.0,
            base_kv: 11.0,
            v_norm: 1.0,
            v_min: 0.95,
            v_max: 1.05,
            buses: vec![Bus::root("s", (0.0, 7.3), (-2.0, 2.0)), Bus::load("a", 0.731, 0.219)],
            feeders: vec![Feeder::new("f", "s", "a", 0.39, 0.27, 310.0)],
        };
        let net = per_unit_ingest(&raw).unwrap();
        let back = to_engineering(&net).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
        assert!(close(back.buses[1].load_p, 0.731));
        assert!(close(back.feeders[0].r, 0.39));
        assert!(close(back.feeders[0].i_max, 310.0));
    }

    #[test]
    fn forced_states() {
        let mut f = Feeder::new("f", "a", "b", 0.1, 0.1, 1.0);
        assert_eq!(f.forced_state(), None);
        f.switchable = false;
        assert_eq!(f.forced_state(), Some(true));
        f.fixed_state = Some(false);
        assert_eq!(f.forced_state(), Some(false));
    }

    #[test]
    fn config_defaults() {
        let cfg = RunConfig::reconfiguration();
        assert_eq!(cfg.max_iters, 5);
        assert_eq!(cfg.n_s, NsPolicy::Fixed(1));
        assert!(cfg.validate().is_ok());
        let mut bad = RunConfig::restoration();
        bad.lambda = 0;
        assert!(bad.validate().is_err());
    }
}
