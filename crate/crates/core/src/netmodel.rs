//! Transmission network: bus admittance matrices, polar power-flow
//! injections and the network energy function with its derivatives.
//!
//! Bus voltages are stacked as `y = (θ₁..θₙ, V₁..Vₙ)` and injections as
//! `u = (P₁..Pₙ, Q₁..Qₙ)`. All quantities are per-unit, angles in radians.

use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Real;

/// Series branch between two buses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineParams<T> {
    pub from: usize,
    pub to: usize,
    /// Series resistance (p.u.).
    pub r: T,
    /// Series reactance (p.u.).
    pub x: T,
}

impl<T: Real> LineParams<T> {
    pub fn new(from: usize, to: usize, r: T, x: T) -> Self {
        Self { from, to, r, x }
    }

    /// Lossless line with reactance `x`.
    pub fn lossless(from: usize, to: usize, x: T) -> Self {
        Self::new(from, to, T::zero(), x)
    }

    /// Series admittance `1 / (r + jx)` as `(re, im)`.
    pub fn series_admittance(&self) -> (T, T) {
        let den = self.r * self.r + self.x * self.x;
        (self.r / den, -self.x / den)
    }
}

/// Stacked bus voltage phasors, the network output `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageProfile<T> {
    pub theta: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> VoltageProfile<T> {
    pub fn new(theta: Vec<T>, v: Vec<T>) -> Self {
        assert_eq!(theta.len(), v.len(), "theta and V must have equal length");
        Self { theta, v }
    }

    /// θ = 0, V = 1 at every bus.
    pub fn flat(n: usize) -> Self {
        Self::new(vec![T::zero(); n], vec![T::one(); n])
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// `(θ₁..θₙ, V₁..Vₙ)`.
    pub fn stacked(&self) -> Vec<T> {
        self.theta.iter().chain(self.v.iter()).copied().collect()
    }

    pub fn from_stacked(y: &[T]) -> Self {
        assert!(y.len().is_multiple_of(2), "stacked profile needs even length");
        let n = y.len() / 2;
        Self::new(y[..n].to_vec(), y[n..].to_vec())
    }

    /// Adds `c` to every angle.
    pub fn shifted(&self, c: T) -> Self {
        Self::new(self.theta.iter().map(|t| *t + c).collect(), self.v.clone())
    }

    pub fn is_valid(&self) -> bool {
        self.v.iter().all(|v| *v > T::zero() && v.is_finite()) && self.theta.iter().all(|t| t.is_finite())
    }
}

/// Bus power injections, the network input `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerInjections<T> {
    pub p: Vec<T>,
    pub q: Vec<T>,
}

impl<T: Real> PowerInjections<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            p: vec![T::zero(); n],
            q: vec![T::zero(); n],
        }
    }

    pub fn stacked(&self) -> Vec<T> {
        self.p.iter().chain(self.q.iter()).copied().collect()
    }

    /// `max(|ΔP|, |ΔQ|)` against another injection vector.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.p
            .iter()
            .zip(&other.p)
            .chain(self.q.iter().zip(&other.q))
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }
}

/// Which admittance data the energy function may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyMode {
    /// Refuse lossy networks.
    #[default]
    Lossless,
    /// Use the susceptance matrix only, even when conductances are present.
    SusceptanceOnly,
}

/// Network topology plus bus admittance matrix `Y = G + jB`.
#[derive(Debug, Clone)]
pub struct NetworkModel<T> {
    n: usize,
    lines: Vec<LineParams<T>>,
    g: DenseMatrix<T>,
    b: DenseMatrix<T>,
    lossless: bool,
    neighbors: Vec<Vec<usize>>,
}

impl<T: Real> NetworkModel<T> {
    /// Assembles `G` and `B` from series branches (no shunts).
    pub fn build(lines: &[LineParams<T>], n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidNetwork(format!("need at least 2 buses, got {n}")));
        }
        let mut seen = HashSet::new();
        let mut g = DenseMatrix::zeros(n, n);
        let mut b = DenseMatrix::zeros(n, n);
        let mut neighbors = vec![Vec::new(); n];
        for (k, line) in lines.iter().enumerate() {
            let (i, j) = (line.from, line.to);
            if i >= n || j >= n {
                return Err(Error::InvalidNetwork(format!("line {k} references bus outside 0..{n}")));
            }
            if i == j {
                return Err(Error::InvalidNetwork(format!("line {k} is a self-loop at bus {i}")));
            }
            if !(line.x > T::zero()) {
                return Err(Error::InvalidNetwork(format!("line {k} has non-positive reactance")));
            }
            if !(line.r >= T::zero()) {
                return Err(Error::InvalidNetwork(format!("line {k} has negative resistance")));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidNetwork(format!("duplicate line between {i} and {j}")));
            }
            let (gs, bs) = line.series_admittance();
            g[(i, j)] -= gs;
            g[(j, i)] -= gs;
            b[(i, j)] -= bs;
            b[(j, i)] -= bs;
            g[(i, i)] += gs;
            g[(j, j)] += gs;
            b[(i, i)] += bs;
            b[(j, j)] += bs;
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        if !is_connected(&neighbors) {
            return Err(Error::Disconnected);
        }
        let lossless = lines.iter().all(|l| l.r == T::zero());
        Ok(Self {
            n,
            lines: lines.to_vec(),
            g,
            b,
            lossless,
            neighbors,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lines(&self) -> &[LineParams<T>] {
        &self.lines
    }

    pub fn g(&self) -> &DenseMatrix<T> {
        &self.g
    }

    pub fn b(&self) -> &DenseMatrix<T> {
        &self.b
    }

    pub fn is_lossless(&self) -> bool {
        self.lossless
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Copy of this network with every susceptance multiplied by `c`.
    pub fn with_scaled_susceptance(&self, c: T) -> Self {
        let mut out = self.clone();
        out.b = self.b.scale(c);
        out
    }

    /// Copy with a shunt susceptance added at `bus` (`B_bus,bus += b_shunt`).
    pub fn with_bus_shunt(&self, bus: usize, b_shunt: T) -> Result<Self> {
        if bus >= self.n {
            return Err(Error::InvalidInput(format!("bus {bus} does not exist")));
        }
        let mut out = self.clone();
        out.b[(bus, bus)] += b_shunt;
        Ok(out)
    }

    fn check_profile(&self, y: &VoltageProfile<T>) -> Result<()> {
        if y.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "voltage profile has {} buses, network has {}",
                y.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Polar power-flow injections `u = g(y)`, conductance terms included.
    pub fn injections(&self, y: &VoltageProfile<T>) -> Result<PowerInjections<T>> {
        self.check_profile(y)?;
        let mut out = PowerInjections::zeros(self.n);
        self.injections_into(&y.theta, &y.v, &mut out.p, &mut out.q);
        Ok(out)
    }

    /// Allocation-free variant of [`injections`](Self::injections).
    pub fn injections_into(&self, theta: &[T], v: &[T], p: &mut [T], q: &mut [T]) {
        let (g, b) = (&self.g, &self.b);
        for i in 0..self.n {
            let vi = v[i];
            let mut pi = g[(i, i)] * vi * vi;
            let mut qi = -b[(i, i)] * vi * vi;
            for &j in &self.neighbors[i] {
                let (s, c) = (theta[i] - theta[j]).sin_cos();
                let vv = vi * v[j];
                let (bij, gij) = (b[(i, j)], g[(i, j)]);
                pi += vv * (bij * s + gij * c);
                qi -= vv * (bij * c - gij * s);
            }
            p[i] = pi;
            q[i] = qi;
        }
    }

    /// Jacobian of `u = g(y)` as a 2n×2n matrix, rows `(P, Q)`, columns `(θ, V)`.
    pub fn injection_jacobian(&self, y: &VoltageProfile<T>) -> Result<DenseMatrix<T>> {
        self.check_profile(y)?;
        let n = self.n;
        let (g, b) = (&self.g, &self.b);
        let (theta, v) = (&y.theta, &y.v);
        let two = T::lit(2.0);
        let mut jac = DenseMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            let vi = v[i];
            let mut dp_dti = T::zero();
            let mut dq_dti = T::zero();
            let mut dp_dvi = two * g[(i, i)] * vi;
            let mut dq_dvi = -two * b[(i, i)] * vi;
            for &k in &self.neighbors[i] {
                let (s, c) = (theta[i] - theta[k]).sin_cos();
                let (bik, gik) = (b[(i, k)], g[(i, k)]);
                let bc_gs = bik * c - gik * s;
                let bs_gc = bik * s + gik * c;
                let vv = vi * v[k];
                dp_dti += vv * bc_gs;
                dq_dti += vv * bs_gc;
                dp_dvi += v[k] * bs_gc;
                dq_dvi -= v[k] * bc_gs;
                jac[(i, k)] = -vv * bc_gs;
                jac[(n + i, k)] = -vv * bs_gc;
                jac[(i, n + k)] = vi * bs_gc;
                jac[(n + i, n + k)] = -vi * bc_gs;
            }
            jac[(i, i)] = dp_dti;
            jac[(n + i, i)] = dq_dti;
            jac[(i, n + i)] = dp_dvi;
            jac[(n + i, n + i)] = dq_dvi;
        }
        Ok(jac)
    }

    fn check_energy(&self, y: &VoltageProfile<T>, mode: EnergyMode) -> Result<()> {
        self.check_profile(y)?;
        if mode == EnergyMode::Lossless && !self.lossless {
            return Err(Error::LossyNetwork);
        }
        if !y.v.iter().all(|v| *v > T::zero()) {
            return Err(Error::InvalidInput("energy function needs V > 0".into()));
        }
        Ok(())
    }

    /// Network energy `W_N(y) = Σ −½BᵢᵢVᵢ² − Σ_(i,j)∈E BᵢⱼVᵢVⱼcosθᵢⱼ`.
    pub fn energy(&self, y: &VoltageProfile<T>, mode: EnergyMode) -> Result<T> {
        self.check_energy(y, mode)?;
        let b = &self.b;
        let half = T::lit(0.5);
        let mut w = T::zero();
        for i in 0..self.n {
            w -= half * b[(i, i)] * y.v[i] * y.v[i];
            for &j in self.neighbors[i].iter().filter(|&&j| j > i) {
                w -= b[(i, j)] * y.v[i] * y.v[j] * (y.theta[i] - y.theta[j]).cos();
            }
        }
        Ok(w)
    }

    /// Analytic gradient `∇W_N` in stacked `(θ, V)` order.
    pub fn energy_gradient(&self, y: &VoltageProfile<T>, mode: EnergyMode) -> Result<Vec<T>> {
        self.check_energy(y, mode)?;
        let n = self.n;
        let b = &self.b;
        let mut grad = vec![T::zero(); 2 * n];
        for i in 0..n {
            let mut dth = T::zero();
            let mut dv = -b[(i, i)] * y.v[i];
            for &j in &self.neighbors[i] {
                let (s, c) = (y.theta[i] - y.theta[j]).sin_cos();
                dth += b[(i, j)] * y.v[i] * y.v[j] * s;
                dv -= b[(i, j)] * y.v[j] * c;
            }
            grad[i] = dth;
            grad[n + i] = dv;
        }
        Ok(grad)
    }

    /// Analytic Hessian `∇²W_N`, 2n×2n symmetric.
    pub fn energy_hessian(&self, y: &VoltageProfile<T>, mode: EnergyMode) -> Result<DenseMatrix<T>> {
        self.check_energy(y, mode)?;
        let n = self.n;
        let b = &self.b;
        let (theta, v) = (&y.theta, &y.v);
        let mut h = DenseMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            let mut tt = T::zero();
            let mut tv = T::zero();
            for &k in &self.neighbors[i] {
                let bik = b[(i, k)];
                let (s, c) = (theta[i] - theta[k]).sin_cos();
                tt += bik * v[i] * v[k] * c;
                tv += bik * v[k] * s;
                h[(i, k)] = -bik * v[i] * v[k] * c;
                h[(i, n + k)] = bik * v[i] * s;
                h[(n + k, i)] = bik * v[i] * s;
                h[(n + i, n + k)] = -bik * c;
            }
            h[(i, i)] = tt;
            h[(i, n + i)] = tv;
            h[(n + i, i)] = tv;
            h[(n + i, n + i)] = -b[(i, i)];
        }
        Ok(h)
    }
}

fn is_connected(neighbors: &[Vec<usize>]) -> bool {
    let n = neighbors.len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for &j in &neighbors[i] {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == n
}
