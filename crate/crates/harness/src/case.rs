//! JSON case files: topology, device data, bus roles and experiment settings.

use std::path::Path;

use passivity_core::devices::{DeviceSpec, SgPhysical};
use passivity_core::netmodel::{LineParams, NetworkModel};
use passivity_core::powerflow::BusRole;
use serde::Deserialize;
use thiserror::Error;

/// The bundled three-bus case.
pub const CASE3_JSON: &str = include_str!("../cases/case3.json");

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    #[serde(default)]
    pub name: String,
    pub buses: Vec<BusEntry>,
    pub lines: Vec<LineEntry>,
    /// Resistance applied to every line when the lossy variant is requested.
    #[serde(default = "default_lossy_r")]
    pub lossy_r: f64,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub simulation: SimulationSettings,
    #[serde(default)]
    pub sweep: SweepSettings,
}

fn default_lossy_r() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusEntry {
    pub id: usize,
    pub device: DeviceEntry,
    pub role: RoleEntry,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum DeviceEntry {
    #[serde(rename = "SG")]
    Sg {
        #[serde(rename = "M")]
        m: f64,
        #[serde(rename = "D")]
        d: f64,
        #[serde(rename = "Td_prime")]
        td_prime: f64,
        xd: f64,
        xd_prime: f64,
        #[serde(rename = "K_P", default = "default_kp")]
        k_p: f64,
    },
    #[serde(rename = "CD")]
    ConventionalDroop { tau1: f64, tau2: f64 },
    #[serde(rename = "QD")]
    QuadraticDroop { tau1: f64, tau2: f64 },
}

fn default_kp() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum RoleEntry {
    #[serde(rename = "slack")]
    Slack {
        #[serde(default)]
        theta: f64,
        #[serde(rename = "V", default = "one")]
        v: f64,
    },
    #[serde(rename = "PV")]
    Pv {
        #[serde(rename = "P")]
        p: f64,
        #[serde(rename = "V", default = "one")]
        v: f64,
    },
    #[serde(rename = "PQ")]
    Pq {
        #[serde(rename = "P")]
        p: f64,
        #[serde(rename = "Q")]
        q: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineEntry {
    pub from: usize,
    pub to: usize,
    #[serde(default)]
    pub r: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSettings {
    pub step: f64,
    pub fault_shunt_b: f64,
    pub t_fault_on: f64,
    pub horizon: f64,
    pub window: f64,
    pub tol: f64,
    pub cct_tol: f64,
    pub cct_max: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            step: 1e-4,
            fault_shunt_b: -1000.0,
            t_fault_on: 0.1,
            horizon: 20.0,
            window: 2.0,
            tol: 1e-3,
            cct_tol: 1e-3,
            cct_max: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub s_min: f64,
    pub s_max: f64,
    pub s_steps: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho_steps: usize,
    /// Synthesis margin added to every gain bound.
    pub margin: f64,
    /// Optional per-bus σ offsets added on top of the uniform value.
    pub sigma_offsets: Option<Vec<f64>>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            s_min: 0.5,
            s_max: 2.5,
            s_steps: 21,
            rho_min: -1.0,
            rho_max: 1.0,
            rho_steps: 41,
            margin: 0.0,
            sigma_offsets: None,
        }
    }
}

/// Evenly spaced grid including both ends; a single step yields `[min]`.
pub fn linspace(min: f64, max: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..steps)
            .map(|k| min + (max - min) * k as f64 / (steps - 1) as f64)
            .collect(),
    }
}

impl CaseFile {
    pub fn parse(text: &str) -> Result<Self, CaseError> {
        let case: CaseFile = serde_json::from_str(text).map_err(|e| {
            if e.is_data() {
                CaseError::Schema(e.to_string())
            } else {
                CaseError::Parse {
                    line: e.line(),
                    column: e.column(),
                    message: e.to_string(),
                }
            }
        })?;
        case.validate()?;
        Ok(case)
    }

    pub fn bundled() -> Self {
        Self::parse(CASE3_JSON).expect("bundled case is valid")
    }

    pub fn n(&self) -> usize {
        self.buses.len()
    }

    fn validate(&self) -> Result<(), CaseError> {
        let schema = |m: String| Err(CaseError::Schema(m));
        let n = self.buses.len();
        if n < 2 {
            return schema(format!("buses: need at least 2, got {n}"));
        }
        let mut ids: Vec<usize> = self.buses.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        if ids != (1..=n).collect::<Vec<_>>() {
            return schema("buses.id: ids must be 1..n without gaps or repeats".into());
        }
        for b in &self.buses {
            let ctx = format!("buses[id={}]", b.id);
            match b.device {
                DeviceEntry::Sg {
                    m,
                    d,
                    td_prime,
                    xd,
                    xd_prime,
                    k_p,
                } => {
                    positive(&format!("{ctx}.device.M"), m)?;
                    nonnegative(&format!("{ctx}.device.D"), d)?;
                    positive(&format!("{ctx}.device.Td_prime"), td_prime)?;
                    positive(&format!("{ctx}.device.xd_prime"), xd_prime)?;
                    positive(&format!("{ctx}.device.K_P"), k_p)?;
                    if !(xd > xd_prime) {
                        return schema(format!("{ctx}.device.xd: must exceed xd_prime"));
                    }
                }
                DeviceEntry::ConventionalDroop { tau1, tau2 } | DeviceEntry::QuadraticDroop { tau1, tau2 } => {
                    positive(&format!("{ctx}.device.tau1"), tau1)?;
                    positive(&format!("{ctx}.device.tau2"), tau2)?;
                }
            }
            match b.role {
                RoleEntry::Slack { theta, v } => {
                    finite(&format!("{ctx}.role.theta"), theta)?;
                    positive(&format!("{ctx}.role.V"), v)?;
                }
                RoleEntry::Pv { p, v } => {
                    finite(&format!("{ctx}.role.P"), p)?;
                    positive(&format!("{ctx}.role.V"), v)?;
                }
                RoleEntry::Pq { p, q } => {
                    finite(&format!("{ctx}.role.P"), p)?;
                    finite(&format!("{ctx}.role.Q"), q)?;
                }
            }
        }
        let slack = self
            .buses
            .iter()
            .filter(|b| matches!(b.role, RoleEntry::Slack { .. }))
            .count();
        if slack != 1 {
            return schema(format!("buses.role: exactly one slack bus required, found {slack}"));
        }
        if self.lines.is_empty() {
            return schema("lines: at least one line required".into());
        }
        for (k, l) in self.lines.iter().enumerate() {
            for (key, id) in [("from", l.from), ("to", l.to)] {
                if id == 0 || id > n {
                    return schema(format!("lines[{k}].{key}: bus {id} does not exist"));
                }
            }
            positive(&format!("lines[{k}].x"), l.x)?;
            nonnegative(&format!("lines[{k}].r"), l.r)?;
        }
        nonnegative("lossy_r", self.lossy_r)?;
        positive("solver.tol", self.solver.tol)?;
        if self.solver.max_iter == 0 {
            return schema("solver.max_iter: must be positive".into());
        }
        let sim = &self.simulation;
        positive("simulation.step", sim.step)?;
        if !(sim.fault_shunt_b < 0.0) {
            return schema("simulation.fault_shunt_b: must be negative".into());
        }
        nonnegative("simulation.t_fault_on", sim.t_fault_on)?;
        positive("simulation.horizon", sim.horizon)?;
        positive("simulation.window", sim.window)?;
        positive("simulation.tol", sim.tol)?;
        positive("simulation.cct_tol", sim.cct_tol)?;
        positive("simulation.cct_max", sim.cct_max)?;
        if !(sim.window < sim.horizon) {
            return schema("simulation.window: must be shorter than horizon".into());
        }
        let sw = &self.sweep;
        if !(sw.s_min > 0.0) || !(sw.s_min <= sw.s_max) || sw.s_steps == 0 {
            return schema("sweep.s_*: need 0 < s_min <= s_max and s_steps >= 1".into());
        }
        if !(sw.rho_min <= sw.rho_max) || sw.rho_steps == 0 {
            return schema("sweep.rho_*: need rho_min <= rho_max and rho_steps >= 1".into());
        }
        finite("sweep.margin", sw.margin)?;
        if let Some(off) = &sw.sigma_offsets {
            if off.len() != n {
                return schema(format!("sweep.sigma_offsets: need {n} entries"));
            }
        }
        Ok(())
    }

    /// Line data, with every resistance replaced by `lossy_r` when `lossy`.
    pub fn line_params(&self, lossy: bool) -> Vec<LineParams<f64>> {
        self.lines
            .iter()
            .map(|l| LineParams::new(l.from - 1, l.to - 1, if lossy { self.lossy_r } else { l.r }, l.x))
            .collect()
    }

    pub fn network(&self, lossy: bool) -> Result<NetworkModel<f64>, CaseError> {
        NetworkModel::build(&self.line_params(lossy), self.n()).map_err(|e| CaseError::Schema(format!("lines: {e}")))
    }

    fn sorted_buses(&self) -> Vec<&BusEntry> {
        let mut b: Vec<&BusEntry> = self.buses.iter().collect();
        b.sort_by_key(|b| b.id);
        b
    }

    /// Base-load roles in bus order.
    pub fn roles(&self) -> Vec<BusRole<f64>> {
        self.sorted_buses()
            .iter()
            .map(|b| match b.role {
                RoleEntry::Slack { theta, v } => BusRole::Slack { theta, v },
                RoleEntry::Pv { p, v } => BusRole::Pv { p, v },
                RoleEntry::Pq { p, q } => BusRole::Pq { p, q },
            })
            .collect()
    }

    pub fn device_specs(&self) -> Vec<DeviceSpec<f64>> {
        self.sorted_buses()
            .iter()
            .map(|b| match b.device {
                DeviceEntry::Sg {
                    m,
                    d,
                    td_prime,
                    xd,
                    xd_prime,
                    k_p,
                } => DeviceSpec::Sg {
                    physical: SgPhysical {
                        m,
                        d,
                        t_d: td_prime,
                        x_d: xd,
                        x_d_prime: xd_prime,
                    },
                    k_p,
                },
                DeviceEntry::ConventionalDroop { tau1, tau2 } => DeviceSpec::ConventionalDroop { tau1, tau2 },
                DeviceEntry::QuadraticDroop { tau1, tau2 } => DeviceSpec::QuadraticDroop { tau1, tau2 },
            })
            .collect()
    }
}

fn finite(key: &str, v: f64) -> Result<(), CaseError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CaseError::Schema(format!("{key}: must be finite")))
    }
}

fn positive(key: &str, v: f64) -> Result<(), CaseError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CaseError::Schema(format!("{key}: must be positive, got {v}")))
    }
}

fn nonnegative(key: &str, v: f64) -> Result<(), CaseError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CaseError::Schema(format!("{key}: must be non-negative, got {v}")))
    }
}

/// Reads and validates a case file.
pub fn load_case(path: &Path) -> Result<CaseFile, CaseError> {
    let text = std::fs::read_to_string(path).map_err(|e| CaseError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    CaseFile::parse(&text)
}
