//! Network files and run reports.
//!
//! A network file is a JSON document (see `data/network.schema.json`). Powers,
//! impedances and current limits may each be given in engineering units or per
//! unit, selected by the `units` block; everything is converted to per unit on
//! load.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::multistep::RunReport;
use crate::network::{validate_network, Bus, Feeder, Mode, Network, NetworkError, PerUnitBase};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{field}: {message}")]
    Schema { field: String, message: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerUnit {
    #[default]
    Mw,
    Pu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImpedanceUnit {
    #[default]
    Ohm,
    Pu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurrentUnit {
    #[default]
    A,
    Pu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    #[serde(default)]
    pub power: PowerUnit,
    #[serde(default)]
    pub impedance: ImpedanceUnit,
    #[serde(default)]
    pub current: CurrentUnit,
}

impl Units {
    pub const PER_UNIT: Units = Units { power: PowerUnit::Pu, impedance: ImpedanceUnit::Pu, current: CurrentUnit::Pu };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateFlag {
    #[default]
    Free,
    On,
    Off,
}

impl StateFlag {
    fn to_option(self) -> Option<bool> {
        match self {
            StateFlag::Free => None,
            StateFlag::On => Some(true),
            StateFlag::Off => Some(false),
        }
    }

    fn from_option(o: Option<bool>) -> Self {
        match o {
            None => StateFlag::Free,
            Some(true) => StateFlag::On,
            Some(false) => StateFlag::Off,
        }
    }
}

fn is_free(s: &StateFlag) -> bool {
    *s == StateFlag::Free
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

fn is_zero_pair(x: &[f64; 2]) -> bool {
    *x == [0.0, 0.0]
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_true(b: &bool) -> bool {
    *b
}

fn yes() -> bool {
    true
}

fn unit_voltage() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "is_false")]
    pub root: bool,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub load_p: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub load_q: f64,
    /// `[min, max]`
    #[serde(default, skip_serializing_if = "is_zero_pair")]
    pub gen_p: [f64; 2],
    #[serde(default, skip_serializing_if = "is_zero_pair")]
    pub gen_q: [f64; 2],
    #[serde(default, skip_serializing_if = "is_free")]
    pub state: StateFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederRecord {
    pub id: String,
    pub from: String,
    pub to: String,
    pub r: f64,
    pub x: f64,
    pub i_max: f64,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub switchable: bool,
    #[serde(default, skip_serializing_if = "is_free")]
    pub state: StateFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub base_mva: f64,
    pub base_kv: f64,
    #[serde(default = "unit_voltage")]
    pub v_norm: f64,
    pub v_min: f64,
    pub v_max: f64,
    #[serde(default)]
    pub units: Units,
    pub buses: Vec<BusRecord>,
    pub feeders: Vec<FeederRecord>,
}

fn check_unique<'a>(kind: &str, list: &str, ids: impl Iterator<Item = &'a str>) -> Result<(), IoError> {
    let mut seen = HashSet::new();
    for (i, id) in ids.enumerate() {
        if !seen.insert(id) {
            return Err(IoError::Schema {
                field: format!("{list}[{i}].id"),
                message: format!("duplicate {kind} id \"{id}\""),
            });
        }
    }
    Ok(())
}

impl NetworkFile {
    /// Converts to a per-unit [`Network`] without validating it.
    pub fn to_network(&self) -> Result<Network, IoError> {
        check_unique("bus", "buses", self.buses.iter().map(|b| b.id.as_str()))?;
        check_unique("feeder", "feeders", self.feeders.iter().map(|f| f.id.as_str()))?;
        let base = PerUnitBase::new(self.base_mva, self.base_kv)?;
        let pw = |x: f64| match self.units.power {
            PowerUnit::Mw => base.power_to_pu(x),
            PowerUnit::Pu => x,
        };
        let z = |x: f64| match self.units.impedance {
            ImpedanceUnit::Ohm => base.impedance_to_pu(x),
            ImpedanceUnit::Pu => x,
        };
        let cur = |x: f64| match self.units.current {
            CurrentUnit::A => base.current_to_pu(x),
            CurrentUnit::Pu => x,
        };
        let buses = self
            .buses
            .iter()
            .map(|b| Bus {
                id: b.id.clone(),
                is_root: b.root,
                load_p: pw(b.load_p),
                load_q: pw(b.load_q),
                gen_p_min: pw(b.gen_p[0]),
                gen_p_max: pw(b.gen_p[1]),
                gen_q_min: pw(b.gen_q[0]),
                gen_q_max: pw(b.gen_q[1]),
                fixed_state: b.state.to_option(),
            })
            .collect();
        let feeders = self
            .feeders
            .iter()
            .map(|f| Feeder {
                id: f.id.clone(),
                from_bus: f.from.clone(),
                to_bus: f.to.clone(),
                r: z(f.r),
                x: z(f.x),
                i_max: cur(f.i_max),
                switchable: f.switchable,
                fixed_state: f.state.to_option(),
            })
            .collect();
        Ok(Network::new(
            self.name.clone(),
            buses,
            feeders,
            (self.v_min, self.v_norm, self.v_max),
            (self.base_mva, self.base_kv),
        ))
    }

    /// Describes `net` in the requested units.
    pub fn from_network(net: &Network, units: Units) -> Result<Self, IoError> {
        let base = PerUnitBase::new(net.base_mva, net.base_kv)?;
        let pw = |x: f64| match units.power {
            PowerUnit::Mw => base.power_from_pu(x),
            PowerUnit::Pu => x,
        };
        let z = |x: f64| match units.impedance {
            ImpedanceUnit::Ohm => base.impedance_from_pu(x),
            ImpedanceUnit::Pu => x,
        };
        let cur = |x: f64| match units.current {
            CurrentUnit::A => base.current_from_pu(x),
            CurrentUnit::Pu => x,
        };
        Ok(NetworkFile {
            name: net.name.clone(),
            description: None,
            base_mva: net.base_mva,
            base_kv: net.base_kv,
            v_norm: net.v_norm,
            v_min: net.v_min,
            v_max: net.v_max,
            units,
            buses: net
                .buses
                .iter()
                .map(|b| BusRecord {
                    id: b.id.clone(),
                    root: b.is_root,
                    load_p: pw(b.load_p),
                    load_q: pw(b.load_q),
                    gen_p: [pw(b.gen_p_min), pw(b.gen_p_max)],
                    gen_q: [pw(b.gen_q_min), pw(b.gen_q_max)],
                    state: StateFlag::from_option(b.fixed_state),
                })
                .collect(),
            feeders: net
                .feeders
                .iter()
                .map(|f| FeederRecord {
                    id: f.id.clone(),
                    from: f.from_bus.clone(),
                    to: f.to_bus.clone(),
                    r: z(f.r),
                    x: z(f.x),
                    i_max: cur(f.i_max),
                    switchable: f.switchable,
                    state: StateFlag::from_option(f.fixed_state),
                })
                .collect(),
        })
    }
}

/// Parses and validates a network document.
pub fn parse_network(text: &str) -> Result<Network, IoError> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| IoError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let net = file.to_network()?;
    let report = validate_network(&net);
    if !report.is_empty() {
        return Err(NetworkError::Invalid(report).into());
    }
    Ok(net)
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IoError::Read { path: path.to_path_buf(), source })?;
    parse_network(&text)
}

pub fn network_to_string(net: &Network, units: Units) -> Result<String, IoError> {
    let file = NetworkFile::from_network(net, units)?;
    Ok(serde_json::to_string_pretty(&file).expect("network files always serialize") + "\n")
}

pub fn save_network(net: &Network, path: impl AsRef<Path>, units: Units) -> Result<(), IoError> {
    let path = path.as_ref();
    let text = network_to_string(net, units)?;
    fs::write(path, text).map_err(|source| IoError::Write { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Table,
}

/// Report as pretty JSON. With `normalize_timing`, wall-clock fields are zeroed so
/// that identical runs render identically.
pub fn report_json(report: &RunReport, normalize_timing: bool) -> String {
    let mut r = report.clone();
    if normalize_timing {
        for it in &mut r.iterations {
            it.wall_time = 0.0;
            it.accumulated_time = 0.0;
            it.solution.wall_time = 0.0;
        }
        if let Some(s) = &mut r.final_solution {
            s.wall_time = 0.0;
        }
    }
    serde_json::to_string_pretty(&r).expect("reports always serialize") + "\n"
}

/// Iteration table: number, accumulated time, objective (kW), E_p^m and E_q^m.
/// Restoration runs get a second table with restored feeder, bus and island counts.
pub fn report_table(report: &RunReport, normalize_timing: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>9}  {:>16}  {:>20}  {:>14}  {:>14}",
        "Iteration", "Accum. time (s)", "Objective (kW)", "E_p^m (%)", "E_q^m (%)"
    );
    let kw = report.base_mva * 1000.0;
    for it in &report.iterations {
        let t = if normalize_timing { 0.0 } else { it.accumulated_time };
        let fmt_e = |e: Option<f64>| e.map_or("-".to_string(), |v| format!("{v:.6}"));
        let obj = if it.solution.status.is_feasible() {
            format!("{:.4}", it.solution.objective * kw)
        } else {
            "infeasible".into()
        };
        let _ = writeln!(
            out,
            "{:>9}  {:>16.4}  {:>20}  {:>14}  {:>14}",
            it.g,
            t,
            obj,
            fmt_e(it.e_p_mean()),
            fmt_e(it.e_q_mean())
        );
    }
    if report.config.mode == Mode::Restoration {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:>9}  {:>16}  {:>16}  {:>16}",
            "Iteration", "Restored feeders", "Restored buses", "Islands"
        );
        for it in &report.iterations {
            let Some(c) = it.topology else { continue };
            let _ = writeln!(out, "{:>9}  {:>16}  {:>16}  {:>16}", it.g, c.feeders, c.buses, c.islands);
        }
    }
    out
}

pub fn write_report(report: &RunReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<(), IoError> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Json => report_json(report, false),
        ReportFormat::Table => report_table(report, false),
    };
    fs::write(path, text).map_err(|source| IoError::Write { path: path.to_path_buf(), source })
}
