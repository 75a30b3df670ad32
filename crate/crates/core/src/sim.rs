//! Fixed-step RK4 simulation of the closed loop, short-circuit faults and
//! critical clearing time search.

use std::io::Write;

use crate::error::{Error, Result};
use crate::netmodel::NetworkModel;
use crate::scalar::Real;
use crate::system::{RhsScratch, SystemModel};

/// Voltage magnitude below which integration aborts.
pub const DOMAIN_FLOOR: f64 = 1e-4;

/// One classical RK4 step of `ẋ = f(t, x)`, in place.
pub fn rk4_step<T: Real, F>(mut f: F, t: T, x: &mut [T], h: T)
where
    F: FnMut(T, &[T], &mut [T]),
{
    let n = x.len();
    let half = T::lit(0.5);
    let mut k1 = vec![T::zero(); n];
    let mut k2 = vec![T::zero(); n];
    let mut k3 = vec![T::zero(); n];
    let mut k4 = vec![T::zero(); n];
    let mut tmp = vec![T::zero(); n];
    f(t, x, &mut k1);
    for i in 0..n {
        tmp[i] = x[i] + half * h * k1[i];
    }
    f(t + half * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + half * h * k2[i];
    }
    f(t + half * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    f(t + h, &tmp, &mut k4);
    let sixth = h / T::lit(6.0);
    for i in 0..n {
        x[i] += sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
    }
}

/// Allocation-free RK4 stepper for an autonomous closed loop.
struct Stepper<T> {
    k: [Vec<T>; 4],
    tmp: Vec<T>,
    scratch: RhsScratch<T>,
}

impl<T: Real> Stepper<T> {
    fn new(dim: usize, n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![T::zero(); dim]),
            tmp: vec![T::zero(); dim],
            scratch: RhsScratch::new(n),
        }
    }

    fn step(&mut self, sys: &SystemModel<T>, net: &NetworkModel<T>, x: &mut [T], h: T) {
        let half = T::lit(0.5);
        let [k1, k2, k3, k4] = &mut self.k;
        let n = x.len();
        sys.rhs_into(net, x, k1, &mut self.scratch);
        for i in 0..n {
            self.tmp[i] = x[i] + half * h * k1[i];
        }
        sys.rhs_into(net, &self.tmp, k2, &mut self.scratch);
        for i in 0..n {
            self.tmp[i] = x[i] + half * h * k2[i];
        }
        sys.rhs_into(net, &self.tmp, k3, &mut self.scratch);
        for i in 0..n {
            self.tmp[i] = x[i] + h * k3[i];
        }
        sys.rhs_into(net, &self.tmp, k4, &mut self.scratch);
        let sixth = h / T::lit(6.0);
        let two = T::lit(2.0);
        for i in 0..n {
            x[i] += sixth * (k1[i] + two * (k2[i] + k3[i]) + k4[i]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions<T> {
    pub step: T,
    /// Store every k-th step (the first and last samples are always stored).
    pub record_every: usize,
}

impl<T: Real> Default for IntegrateOptions<T> {
    fn default() -> Self {
        Self {
            step: T::lit(1e-4),
            record_every: 100,
        }
    }
}

/// Sampled closed-loop trajectory.
#[derive(Debug, Clone, Default)]
pub struct Trace<T> {
    pub state_names: Vec<String>,
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    /// Stacked `(θ, V)` per sample.
    pub outputs: Vec<Vec<T>>,
    /// Stacked `(P, Q)` per sample, from the network active at that instant.
    pub inputs: Vec<Vec<T>>,
}

impl<T: Real> Trace<T> {
    fn new(sys: &SystemModel<T>) -> Self {
        Self {
            state_names: sys.state_names(),
            ..Self::default()
        }
    }

    fn record(&mut self, sys: &SystemModel<T>, net: &NetworkModel<T>, t: T, x: &[T]) {
        let y = sys.output(x);
        let mut p = vec![T::zero(); y.len()];
        let mut q = vec![T::zero(); y.len()];
        net.injections_into(&y.theta, &y.v, &mut p, &mut q);
        self.times.push(t);
        self.states.push(x.to_vec());
        self.outputs.push(y.stacked());
        p.extend(q);
        self.inputs.push(p);
    }

    fn append(&mut self, mut other: Trace<T>) {
        let skip = match (self.times.last(), other.times.first()) {
            (Some(a), Some(b)) if *a >= *b => 1,
            _ => 0,
        };
        self.times.extend(other.times.drain(..).skip(skip));
        self.states.extend(other.states.drain(..).skip(skip));
        self.outputs.extend(other.outputs.drain(..).skip(skip));
        self.inputs.extend(other.inputs.drain(..).skip(skip));
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&[T]> {
        self.states.last().map(|s| s.as_slice())
    }

    /// Writes `t, <states>, P_i.., Q_i.., V_i.., theta_i..` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.outputs.first().map_or(0, |o| o.len() / 2);
        let mut header = vec!["t".to_string()];
        header.extend(self.state_names.iter().cloned());
        for prefix in ["P", "Q", "V", "theta"] {
            header.extend((1..=n).map(|i| format!("{prefix}_{i}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![format!("{}", self.times[k])];
            row.extend(self.states[k].iter().map(|v| format!("{v}")));
            row.extend(self.inputs[k].iter().map(|v| format!("{v}")));
            row.extend(self.outputs[k][n..].iter().map(|v| format!("{v}")));
            row.extend(self.outputs[k][..n].iter().map(|v| format!("{v}")));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn steps_for<T: Real>(span: T, step: T) -> usize {
    let raw = (span / step).to_f64_lossy();
    if raw <= 0.0 {
        0
    } else {
        (raw - 1e-9).ceil() as usize
    }
}

/// Core loop shared by [`integrate`] and the fault simulation. Calls `visit`
/// after every step with `(t, x)`.
#[allow(clippy::too_many_arguments)]
fn run<T: Real>(
    sys: &SystemModel<T>,
    net: &NetworkModel<T>,
    x: &mut [T],
    t0: T,
    t1: T,
    step: T,
    record_every: usize,
    trace: Option<&mut Trace<T>>,
    mut visit: impl FnMut(T, &[T]),
) -> Result<()> {
    let steps = steps_for(t1 - t0, step);
    let mut stepper = Stepper::new(x.len(), sys.devices().len());
    let floor = T::lit(DOMAIN_FLOOR);
    let record_every = record_every.max(1);
    let mut trace = trace;
    if let Some(tr) = trace.as_deref_mut() {
        tr.record(sys, net, t0, x);
    }
    for k in 0..steps {
        let t = t0 + T::count(k) * step;
        let h = if k + 1 == steps { t1 - t } else { step };
        stepper.step(sys, net, x, h);
        let t_new = if k + 1 == steps { t1 } else { t + step };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                time: t_new.to_f64_lossy(),
            });
        }
        if !sys.in_domain(x, floor) {
            return Err(Error::DomainExitAt {
                time: t_new.to_f64_lossy(),
                detail: "bus voltage below floor".into(),
            });
        }
        visit(t_new, x);
        if let Some(tr) = trace.as_deref_mut() {
            if (k + 1) % record_every == 0 || k + 1 == steps {
                tr.record(sys, net, t_new, x);
            }
        }
    }
    Ok(())
}

/// Integrates the closed loop from `x0` over `t_span` with fixed-step RK4.
pub fn integrate<T: Real>(
    sys: &SystemModel<T>,
    x0: &[T],
    t_span: (T, T),
    opts: IntegrateOptions<T>,
) -> Result<Trace<T>> {
    if !(opts.step > T::zero()) {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    if x0.len() != sys.dim() {
        return Err(Error::InvalidInput("initial state has wrong dimension".into()));
    }
    if !sys.in_domain(x0, T::lit(DOMAIN_FLOOR)) {
        return Err(Error::DomainExitAt {
            time: t_span.0.to_f64_lossy(),
            detail: "initial state outside domain".into(),
        });
    }
    let mut x = x0.to_vec();
    let mut trace = Trace::new(sys);
    run(
        sys,
        sys.net(),
        &mut x,
        t_span.0,
        t_span.1,
        opts.step,
        opts.record_every,
        Some(&mut trace),
        |_, _| {},
    )?;
    Ok(trace)
}

/// Integrates `ẋ = f(t, x)` for a generic right-hand side; returns the final state.
pub fn integrate_fn<T: Real, F>(mut f: F, x0: &[T], t_span: (T, T), step: T) -> Vec<T>
where
    F: FnMut(T, &[T], &mut [T]),
{
    let mut x = x0.to_vec();
    let steps = steps_for(t_span.1 - t_span.0, step);
    for k in 0..steps {
        let t = t_span.0 + T::count(k) * step;
        let h = if k + 1 == steps { t_span.1 - t } else { step };
        rk4_step(&mut f, t, &mut x, h);
    }
    x
}

/// Bolted three-phase fault modelled as a shunt susceptance at one bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultScenario<T> {
    pub bus: usize,
    pub fault_shunt_b: T,
    pub t_fault_on: T,
    pub clearing_time: T,
}

impl<T: Real> FaultScenario<T> {
    pub fn new(bus: usize, clearing_time: T) -> Self {
        Self {
            bus,
            fault_shunt_b: T::lit(-1000.0),
            t_fault_on: T::lit(0.1),
            clearing_time,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.bus >= n {
            return Err(Error::InvalidInput(format!(
                "fault bus {} does not exist",
                self.bus + 1
            )));
        }
        if !(self.clearing_time > T::zero()) || !(self.fault_shunt_b < T::zero()) || !(self.t_fault_on >= T::zero()) {
            return Err(Error::InvalidInput(format!("invalid fault scenario {self:?}")));
        }
        Ok(())
    }
}

/// When a post-fault trajectory counts as having returned to `x*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSpec<T> {
    /// Total simulated time from t = 0.
    pub horizon: T,
    /// Length of the tail window.
    pub window: T,
    /// Bound on `‖x(t) − x*‖∞` over the window.
    pub tol: T,
}

impl<T: Real> Default for ConvergenceSpec<T> {
    fn default() -> Self {
        Self {
            horizon: T::lit(20.0),
            window: T::lit(2.0),
            tol: T::lit(1e-3),
        }
    }
}

impl<T: Real> ConvergenceSpec<T> {
    fn validate(&self) -> Result<()> {
        if self.window > T::zero() && self.window < self.horizon && self.tol > T::zero() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid convergence spec {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct FaultOutcome<T> {
    pub trace: Trace<T>,
    pub converged: bool,
    /// `sup ‖x(t) − x*‖∞` over the tail window (infinite after a domain exit).
    pub tail_error: T,
    /// Time of a domain exit or non-finite state, if one occurred.
    pub aborted_at: Option<f64>,
}

/// Pre-fault rest at `x*`, fault-on with the shunt applied, then post-fault
/// on the original network until the horizon.
pub fn simulate_fault<T: Real>(
    sys: &SystemModel<T>,
    scenario: &FaultScenario<T>,
    spec: &ConvergenceSpec<T>,
    opts: IntegrateOptions<T>,
) -> Result<FaultOutcome<T>> {
    scenario.validate(sys.net().n())?;
    spec.validate()?;
    if !(opts.step > T::zero()) {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    let faulted = sys.net().with_bus_shunt(scenario.bus, scenario.fault_shunt_b)?;
    let x_star = sys.x_star().to_vec();
    let t_on = scenario.t_fault_on.min(spec.horizon);
    let t_off = (scenario.t_fault_on + scenario.clearing_time).min(spec.horizon);
    let window_start = spec.horizon - spec.window;

    let mut trace = Trace::new(sys);
    let mut x = x_star.clone();
    let mut tail = T::zero();
    let mut track = |t: T, x: &[T]| {
        if t >= window_start {
            let e = x
                .iter()
                .zip(&x_star)
                .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
            tail = tail.max(e);
        }
    };

    let phases = [
        (sys.net(), T::zero(), t_on),
        (&faulted, t_on, t_off),
        (sys.net(), t_off, spec.horizon),
    ];
    let mut aborted_at = None;
    for (net, a, b) in phases {
        if b <= a {
            continue;
        }
        let mut seg = Trace::new(sys);
        let res = run(
            sys,
            net,
            &mut x,
            a,
            b,
            opts.step,
            opts.record_every,
            Some(&mut seg),
            &mut track,
        );
        trace.append(seg);
        match res {
            Ok(()) => {}
            Err(Error::DomainExitAt { time, .. }) | Err(Error::NonFinite { time }) => {
                aborted_at = Some(time);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let tail_error = if aborted_at.is_some() { T::infinity() } else { tail };
    Ok(FaultOutcome {
        trace,
        converged: aborted_at.is_none() && tail_error < spec.tol,
        tail_error,
        aborted_at,
    })
}

/// Result of a critical clearing time search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CctOutcome<T> {
    /// Largest converging clearing time found, within the bisection tolerance.
    Found(T),
    /// Still converging at the largest bracket tried.
    NeverUnstable { tried_up_to: T },
    /// Not converging even at the lower bracket.
    UnstableAtLower { lower: T },
}

impl<T: Real> CctOutcome<T> {
    pub fn seconds(&self) -> Option<T> {
        match self {
            CctOutcome::Found(t) => Some(*t),
            _ => None,
        }
    }
}

/// Bisection on a monotone predicate `ok(t)` (true below the threshold).
/// The upper end doubles until `ok` fails or it passes `max_hi`.
pub fn bisect_threshold<T: Real, E>(
    mut ok: impl FnMut(T) -> std::result::Result<bool, E>,
    lo: T,
    hi: T,
    tol: T,
    max_hi: T,
) -> std::result::Result<CctOutcome<T>, E> {
    if !ok(lo)? {
        return Ok(CctOutcome::UnstableAtLower { lower: lo });
    }
    let (mut lo, mut hi) = (lo, hi);
    loop {
        if !ok(hi)? {
            break;
        }
        if hi >= max_hi {
            return Ok(CctOutcome::NeverUnstable { tried_up_to: hi });
        }
        lo = hi;
        hi = (hi + hi).min(max_hi);
    }
    while hi - lo > tol {
        let mid = T::lit(0.5) * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CctOutcome::Found(lo))
}

/// Clearing-time bracket and tolerance for [`find_cct`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CctSearch<T> {
    pub lower: T,
    pub upper: T,
    pub max_upper: T,
    pub tol: T,
    pub fault_shunt_b: T,
    pub t_fault_on: T,
}

impl<T: Real> Default for CctSearch<T> {
    fn default() -> Self {
        Self {
            lower: T::lit(1e-3),
            upper: T::lit(0.5),
            max_upper: T::lit(5.0),
            tol: T::lit(1e-3),
            fault_shunt_b: T::lit(-1000.0),
            t_fault_on: T::lit(0.1),
        }
    }
}

/// Critical clearing time for a fault at `bus`.
pub fn find_cct<T: Real>(
    sys: &SystemModel<T>,
    bus: usize,
    spec: &ConvergenceSpec<T>,
    opts: IntegrateOptions<T>,
    search: &CctSearch<T>,
) -> Result<CctOutcome<T>> {
    let opts = IntegrateOptions {
        record_every: usize::MAX,
        ..opts
    };
    bisect_threshold(
        |tc| {
            let scenario = FaultScenario {
                bus,
                fault_shunt_b: search.fault_shunt_b,
                t_fault_on: search.t_fault_on,
                clearing_time: tc,
            };
            simulate_fault(sys, &scenario, spec, opts).map(|o| o.converged)
        },
        search.lower,
        search.upper,
        search.tol,
        search.max_upper,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let x = integrate_fn(|_, x: &[f64], dx: &mut [f64]| dx[0] = -x[0], &[1.0], (0.0, 1.0), 1e-3);
        assert!((x[0] - (-1f64).exp()).abs() < 1e-6);
        assert!((x[0] - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn bisection_finds_synthetic_threshold() {
        let r = bisect_threshold(|t: f64| Ok::<_, ()>(t < 0.25), 0.001, 0.1, 1e-3, 5.0).unwrap();
        let CctOutcome::Found(t) = r else { panic!("{r:?}") };
        assert!((t - 0.25).abs() <= 1e-3);
    }

    #[test]
    fn bisection_reports_missing_sign_change() {
        let r = bisect_threshold(|_t: f64| Ok::<_, ()>(true), 0.001, 0.5, 1e-3, 5.0).unwrap();
        assert_eq!(r, CctOutcome::NeverUnstable { tried_up_to: 5.0 });
        let r = bisect_threshold(|_t: f64| Ok::<_, ()>(false), 0.001, 0.5, 1e-3, 5.0).unwrap();
        assert!(matches!(r, CctOutcome::UnstableAtLower { .. }));
    }
}
