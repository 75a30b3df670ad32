//! Load-scaling λ sweep, (s, ρ) stability grid, critical clearing time table
//! and the per-bus verification report.

use passivity_core::devices::DeviceSpec;
use passivity_core::devices::{GainPolicy, Margins};
use passivity_core::netmodel::{EnergyMode, NetworkModel, VoltageProfile};
use passivity_core::passivity::{network_lambda, PassivityReport};
use passivity_core::powerflow::{scale_load, solve_power_flow_from, BusRole, Equilibrium, PowerFlowOptions};
use passivity_core::sim::{find_cct, CctOutcome, CctSearch, ConvergenceSpec, IntegrateOptions};
use passivity_core::system::{synthesize_system, StabilityVerdict, SystemModel};
use rayon::prelude::*;
use thiserror::Error;

use crate::case::{CaseError, CaseFile};

/// Environment variable bounding the worker pool for grid and CCT cells.
pub const THREADS_ENV: &str = "PASSIVITY_GRID_THREADS";

/// Reference clearing times (seconds), rows = fault bus 1..3, columns =
/// σ offsets 0, 1, 2 above −λ.
pub const REFERENCE_CCT_LOSSLESS: [[f64; 3]; 3] = [[0.076, 0.205, 0.414], [0.090, 0.291, 0.625], [0.087, 0.287, 0.618]];
pub const REFERENCE_CCT_LOSSY: [[f64; 3]; 3] = [[0.055, 0.175, 0.365], [0.062, 0.243, 0.549], [0.060, 0.241, 0.545]];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] passivity_core::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit code: 1 for configuration problems, 2 for numerical or
    /// output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Case(_) | HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}

pub type HarnessResult<T> = Result<T, HarnessError>;

/// A case prepared for experiments: network variant, roles and device data.
#[derive(Debug, Clone)]
pub struct Study {
    pub case: CaseFile,
    pub lossy: bool,
    pub net: NetworkModel<f64>,
    pub roles: Vec<BusRole<f64>>,
    pub specs: Vec<DeviceSpec<f64>>,
    /// Gain policy used for synthesis in every experiment.
    pub policy: GainPolicy,
}

impl Study {
    pub fn new(case: CaseFile, lossy: bool) -> HarnessResult<Self> {
        let net = case.network(lossy)?;
        for spec in case.device_specs() {
            spec.validate()?;
        }
        Ok(Self {
            lossy,
            net,
            roles: case.roles(),
            specs: case.device_specs(),
            policy: GainPolicy::Literal,
            case,
        })
    }

    pub fn n(&self) -> usize {
        self.net.n()
    }

    /// Lossy networks use the susceptance-only energy.
    pub fn energy_mode(&self) -> EnergyMode {
        if self.net.is_lossless() {
            EnergyMode::Lossless
        } else {
            EnergyMode::SusceptanceOnly
        }
    }

    pub fn solver_options(&self) -> PowerFlowOptions<f64> {
        PowerFlowOptions {
            tol: self.case.solver.tol,
            max_iter: self.case.solver.max_iter,
        }
    }

    pub fn solve(&self, s: f64, warm: Option<&VoltageProfile<f64>>) -> HarnessResult<Equilibrium<f64>> {
        if !(s > 0.0) {
            return Err(HarnessError::Config(format!("load scale must be positive, got {s}")));
        }
        let roles = scale_load(&self.roles, s);
        Ok(solve_power_flow_from(&self.net, &roles, self.solver_options(), warm)?.equilibrium)
    }

    pub fn lambda(&self, eq: &Equilibrium<f64>) -> HarnessResult<PassivityReport<f64>> {
        Ok(network_lambda(&self.net, &eq.y_star, self.energy_mode())?)
    }

    /// `σ` per bus: the uniform value plus any configured per-bus offsets.
    pub fn sigma_vector(&self, sigma: f64) -> Vec<f64> {
        match &self.case.sweep.sigma_offsets {
            Some(off) => off.iter().map(|o| sigma + o).collect(),
            None => vec![sigma; self.n()],
        }
    }

    pub fn system(&self, eq: &Equilibrium<f64>, sigma: &[f64]) -> HarnessResult<SystemModel<f64>> {
        let margins = vec![Margins::uniform(self.case.sweep.margin); self.n()];
        Ok(synthesize_system(
            &self.net,
            eq,
            &self.specs,
            sigma,
            &margins,
            self.policy,
        )?)
    }

    pub fn convergence_spec(&self) -> ConvergenceSpec<f64> {
        let sim = &self.case.simulation;
        ConvergenceSpec {
            horizon: sim.horizon,
            window: sim.window,
            tol: sim.tol,
        }
    }

    pub fn integrate_options(&self) -> IntegrateOptions<f64> {
        IntegrateOptions {
            step: self.case.simulation.step,
            record_every: 100,
        }
    }

    pub fn cct_search(&self) -> CctSearch<f64> {
        let sim = &self.case.simulation;
        CctSearch {
            tol: sim.cct_tol,
            max_upper: sim.cct_max,
            fault_shunt_b: sim.fault_shunt_b,
            t_fault_on: sim.t_fault_on,
            ..CctSearch::default()
        }
    }
}

/// Worker pool sized by [`THREADS_ENV`] (default: rayon's choice).
pub fn worker_pool() -> HarnessResult<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| HarnessError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))
}

/// Solves the power flow along `s_values` by continuation. Failed points
/// keep the last successful profile as the next warm start.
pub fn continuation(study: &Study, s_values: &[f64]) -> Vec<HarnessResult<Equilibrium<f64>>> {
    let mut warm: Option<VoltageProfile<f64>> = None;
    s_values
        .iter()
        .map(|&s| {
            let res = study.solve(s, warm.as_ref()).or_else(|e| match warm {
                Some(_) => study.solve(s, None),
                None => Err(e),
            });
            if let Ok(eq) = &res {
                warm = Some(eq.y_star.clone());
            }
            res
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRow {
    pub s: f64,
    /// `None` when the power flow or eigen-solve failed at this load.
    pub lambda: Option<f64>,
    pub error: Option<String>,
}

pub fn sweep_lambda(study: &Study, s_values: &[f64]) -> Vec<LambdaRow> {
    s_values
        .iter()
        .zip(continuation(study, s_values))
        .map(|(&s, eq)| match eq.and_then(|eq| study.lambda(&eq)) {
            Ok(rep) => LambdaRow {
                s,
                lambda: Some(rep.lambda),
                error: None,
            },
            Err(e) => LambdaRow {
                s,
                lambda: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub s: f64,
    pub sigma: f64,
    pub rho: f64,
    /// NaN when the cell could not be evaluated.
    pub max_real_part: f64,
    /// `green`, `red`, `marginal`, or `failed`.
    pub verdict: String,
    pub neg_lambda: f64,
}

/// Evaluates one grid cell.
pub fn grid_cell(study: &Study, eq: &Equilibrium<f64>, s: f64, lambda: f64, rho: f64) -> GridRow {
    let sigma = -lambda + rho;
    let result: HarnessResult<StabilityVerdict<f64>> = study
        .system(eq, &study.sigma_vector(sigma))
        .and_then(|sys| Ok(sys.small_signal()?));
    let (max_real_part, verdict) = match result {
        Ok(v) => (v.max_real_part, v.verdict.label().to_string()),
        Err(_) => (f64::NAN, "failed".to_string()),
    };
    GridRow {
        s,
        sigma,
        rho,
        max_real_part,
        verdict,
        neg_lambda: -lambda,
    }
}

/// Small-signal verdicts over `s_values × rho_values` with `σ = −λ(s) + ρ`,
/// in row-major order (s outer, ρ inner).
pub fn sweep_stability_grid(study: &Study, s_values: &[f64], rho_values: &[f64]) -> HarnessResult<Vec<GridRow>> {
    let eqs: Vec<Option<(Equilibrium<f64>, f64)>> = continuation(study, s_values)
        .into_iter()
        .map(|eq| eq.ok().and_then(|eq| study.lambda(&eq).ok().map(|r| (eq, r.lambda))))
        .collect();
    let cells: Vec<(usize, f64)> = (0..s_values.len())
        .flat_map(|i| rho_values.iter().map(move |&r| (i, r)))
        .collect();
    let pool = worker_pool()?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, rho)| match &eqs[i] {
                Some((eq, lambda)) => grid_cell(study, eq, s_values[i], *lambda, rho),
                None => GridRow {
                    s: s_values[i],
                    sigma: f64::NAN,
                    rho,
                    max_real_part: f64::NAN,
                    verdict: "failed".into(),
                    neg_lambda: f64::NAN,
                },
            })
            .collect()
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CctRow {
    /// 1-based fault bus.
    pub fault_bus: usize,
    pub sigma_offset: f64,
    pub sigma: f64,
    pub outcome: CctOutcome<f64>,
    pub reference: Option<f64>,
}

impl CctRow {
    pub fn seconds(&self) -> Option<f64> {
        self.outcome.seconds()
    }

    /// Printable summary of the outcome.
    pub fn describe(&self) -> String {
        match self.outcome {
            CctOutcome::Found(t) => format!("{t:.3}"),
            CctOutcome::NeverUnstable { tried_up_to } => format!("> {tried_up_to}"),
            CctOutcome::UnstableAtLower { lower } => format!("< {lower}"),
        }
    }
}

/// Critical clearing times at base load for every bus and σ offset.
pub fn cct_table(study: &Study, offsets: &[f64], buses: &[usize]) -> HarnessResult<Vec<CctRow>> {
    let n = study.n();
    if let Some(b) = buses.iter().find(|&&b| b == 0 || b > n) {
        return Err(HarnessError::Config(format!("fault bus {b} does not exist")));
    }
    let eq = study.solve(1.0, None)?;
    let lambda = study.lambda(&eq)?.lambda;
    let reference = if study.lossy {
        &REFERENCE_CCT_LOSSY
    } else {
        &REFERENCE_CCT_LOSSLESS
    };
    let cells: Vec<(usize, usize, f64)> = buses
        .iter()
        .flat_map(|&b| offsets.iter().enumerate().map(move |(k, &o)| (b, k, o)))
        .collect();
    let spec = study.convergence_spec();
    let opts = study.integrate_options();
    let search = study.cct_search();
    let pool = worker_pool()?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|&(bus, k, offset)| {
                let sigma = -lambda + offset;
                let sys = study.system(&eq, &study.sigma_vector(sigma))?;
                let outcome = find_cct(&sys, bus - 1, &spec, opts, &search)?;
                let reference_value =
                    (n == 3 && bus <= 3 && k < 3 && (offset - k as f64).abs() < 1e-12).then(|| reference[bus - 1][k]);
                Ok(CctRow {
                    fault_bus: bus,
                    sigma_offset: offset,
                    sigma,
                    outcome,
                    reference: reference_value,
                })
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusCheck {
    pub bus: usize,
    pub device: &'static str,
    pub sigma: f64,
    pub angle_margin: f64,
    pub voltage_margin: f64,
    /// Gain inequalities hold (margins ≥ 0 up to rounding).
    pub ofp: bool,
    /// `σᵢ > −λ`.
    pub index: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub s: f64,
    pub lambda: f64,
    pub buses: Vec<BusCheck>,
}

impl VerifyReport {
    /// Conjunction of the per-bus checks.
    pub fn satisfied(&self) -> bool {
        self.buses.iter().all(|b| b.ofp && b.index)
    }
}

/// Rounding allowance on marginally synthesized gains.
const MARGIN_ROUNDING: f64 = 1e-12;

pub fn verify(study: &Study, s: f64, sigma: f64) -> HarnessResult<VerifyReport> {
    let eq = study.solve(s, None)?;
    let lambda = study.lambda(&eq)?.lambda;
    let sigmas = study.sigma_vector(sigma);
    let sys = study.system(&eq, &sigmas)?;
    let buses = sys
        .devices()
        .iter()
        .zip(&sigmas)
        .enumerate()
        .map(|(i, (d, &sg))| {
            let (a, v) = d.proposition_margins(sg);
            BusCheck {
                bus: i + 1,
                device: d.label(),
                sigma: sg,
                angle_margin: a,
                voltage_margin: v,
                ofp: a >= -MARGIN_ROUNDING && v >= -MARGIN_ROUNDING,
                index: sg > -lambda,
            }
        })
        .collect();
    Ok(VerifyReport { s, lambda, buses })
}
