//! Closed-loop interconnection of bus devices through the network map
//! `u = g(y)`, its Jacobian, small-signal verdicts and the composite
//! Lyapunov function.

use num_complex::Complex;

use crate::devices::{synthesize_from_sigma, BusOperatingPoint, DeviceModel, DeviceSpec, GainPolicy, Margins};
use crate::error::{Error, Result};
use crate::linalg::{eig_general, DenseMatrix};
use crate::netmodel::{EnergyMode, NetworkModel, VoltageProfile};
use crate::passivity::NetworkStorage;
use crate::powerflow::Equilibrium;
use crate::scalar::{norm_inf, Real};

/// Real-part band treated as neither stable nor unstable.
pub const STABILITY_MARGIN: f64 = 1e-6;
/// Modulus below which an eigenvalue counts as zero.
pub const ZERO_EIGEN_TOL: f64 = 1e-7;
/// Largest tolerated `‖f(x*)‖∞` at assembly.
pub const EQUILIBRIUM_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SystemModel<T> {
    net: NetworkModel<T>,
    devices: Vec<DeviceModel<T>>,
    offsets: Vec<usize>,
    dim: usize,
    equilibrium: Equilibrium<T>,
    x_star: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Marginal,
    Unstable,
}

impl Verdict {
    /// Grid colour used in sweep output.
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Stable => "green",
            Verdict::Marginal => "marginal",
            Verdict::Unstable => "red",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityVerdict<T> {
    /// All Jacobian eigenvalues, sorted by real then imaginary part.
    pub eigenvalues: Vec<Complex<T>>,
    /// Largest real part after removing the structural zeros.
    pub max_real_part: T,
    pub verdict: Verdict,
    pub stable: bool,
    /// Eigenvalues with modulus below [`ZERO_EIGEN_TOL`].
    pub structural_zero_count: usize,
    /// Zero modes imposed by the device structure and excluded from the verdict.
    pub excluded_structural: usize,
}

impl<T: Real> SystemModel<T> {
    /// Couples `devices[i]` to bus `i` and checks that `x*` is stationary.
    pub fn assemble(net: NetworkModel<T>, devices: Vec<DeviceModel<T>>, equilibrium: Equilibrium<T>) -> Result<Self> {
        let n = net.n();
        if devices.len() != n {
            return Err(Error::InvalidInput(format!("{} devices for {n} buses", devices.len())));
        }
        if equilibrium.y_star.len() != n || equilibrium.u_star.p.len() != n {
            return Err(Error::InvalidInput("equilibrium size does not match network".into()));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut dim = 0;
        for d in &devices {
            offsets.push(dim);
            dim += d.state_dim();
        }
        offsets.push(dim);
        let mut equilibrium = equilibrium;
        equilibrium.device_states_star = devices.iter().map(|d| d.equilibrium_state()).collect();
        let x_star: Vec<T> = equilibrium.device_states_star.iter().flatten().copied().collect();
        let sys = Self {
            net,
            devices,
            offsets,
            dim,
            equilibrium,
            x_star,
        };
        let y = sys.output(&sys.x_star);
        let ys = &sys.equilibrium.y_star;
        let output_gap = y
            .theta
            .iter()
            .zip(&ys.theta)
            .chain(y.v.iter().zip(&ys.v))
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
        let residual = norm_inf(&sys.rhs(&sys.x_star)).max(output_gap);
        let tol = T::tol(EQUILIBRIUM_TOL, sys.net.b().max_abs());
        if !(residual <= tol) {
            return Err(Error::InconsistentEquilibrium {
                residual: residual.to_f64_lossy(),
            });
        }
        Ok(sys)
    }

    pub fn net(&self) -> &NetworkModel<T> {
        &self.net
    }

    pub fn devices(&self) -> &[DeviceModel<T>] {
        &self.devices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn equilibrium(&self) -> &Equilibrium<T> {
        &self.equilibrium
    }

    pub fn x_star(&self) -> &[T] {
        &self.x_star
    }

    /// State index range of bus `i`.
    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Bus-qualified state names, e.g. `bus1_delta`.
    pub fn state_names(&self) -> Vec<String> {
        self.devices
            .iter()
            .enumerate()
            .flat_map(|(i, d)| d.state_names().iter().map(move |s| format!("bus{}_{}", i + 1, s)))
            .collect()
    }

    /// Bus voltages read from the device output states.
    pub fn output(&self, x: &[T]) -> VoltageProfile<T> {
        let n = self.devices.len();
        let mut y = VoltageProfile::new(vec![T::zero(); n], vec![T::zero(); n]);
        for (i, d) in self.devices.iter().enumerate() {
            let (th, v) = d.output(&x[self.range(i)]);
            y.theta[i] = th;
            y.v[i] = v;
        }
        y
    }

    /// All bus voltage magnitudes exceed `floor`.
    pub fn in_domain(&self, x: &[T], floor: T) -> bool {
        self.devices
            .iter()
            .enumerate()
            .all(|(i, d)| d.in_domain(&x[self.range(i)], floor))
    }

    pub fn rhs(&self, x: &[T]) -> Vec<T> {
        let mut dx = vec![T::zero(); self.dim];
        let mut scratch = RhsScratch::new(self.devices.len());
        self.rhs_into(&self.net, x, &mut dx, &mut scratch);
        dx
    }

    /// Vector field with the network replaced by `net` (used for faults).
    pub fn rhs_into(&self, net: &NetworkModel<T>, x: &[T], dx: &mut [T], s: &mut RhsScratch<T>) {
        for (i, d) in self.devices.iter().enumerate() {
            let (th, v) = d.output(&x[self.range(i)]);
            s.theta[i] = th;
            s.v[i] = v;
        }
        net.injections_into(&s.theta, &s.v, &mut s.p, &mut s.q);
        for (i, d) in self.devices.iter().enumerate() {
            let r = self.range(i);
            d.rhs(&x[r.clone()], s.p[i], s.q[i], &mut dx[r]);
        }
    }

    /// Analytic Jacobian `∂f/∂x` by the chain rule through `g(y)`.
    pub fn jacobian(&self, x: &[T]) -> Result<DenseMatrix<T>> {
        let n = self.devices.len();
        let y = self.output(x);
        let u = self.net.injections(&y)?;
        let dg = self.net.injection_jacobian(&y)?;
        let mut j = DenseMatrix::zeros(self.dim, self.dim);
        let out_col = |k: usize| -> (usize, usize) {
            let (a, b) = self.devices[k].output_indices();
            (self.offsets[k] + a, self.offsets[k] + b)
        };
        for (i, d) in self.devices.iter().enumerate() {
            let r = self.range(i);
            let xi = &x[r.clone()];
            let jx = d.jacobian_x(xi, u.p[i], u.q[i]);
            let ju = d.jacobian_u(xi);
            for a in 0..d.state_dim() {
                for b in 0..d.state_dim() {
                    j[(r.start + a, r.start + b)] += jx[(a, b)];
                }
                let (dp, dq) = (ju[(a, 0)], ju[(a, 1)]);
                if dp == T::zero() && dq == T::zero() {
                    continue;
                }
                for k in 0..n {
                    let (ct, cv) = out_col(k);
                    j[(r.start + a, ct)] += dp * dg[(i, k)] + dq * dg[(n + i, k)];
                    j[(r.start + a, cv)] += dp * dg[(i, n + k)] + dq * dg[(n + i, n + k)];
                }
            }
        }
        Ok(j)
    }

    /// Eigenvalue verdict at `x*`.
    pub fn small_signal(&self) -> Result<StabilityVerdict<T>> {
        let j = self.jacobian(&self.x_star)?;
        let eigenvalues = eig_general(&j)?;
        let structural: usize = self.devices.iter().map(|d| d.structural_zeros()).sum();
        Ok(classify(eigenvalues, structural))
    }

    /// Composite Lyapunov function and its time derivative along `f`.
    ///
    /// `W = Σᵢ Sᵢ(xᵢ; σᵢ) + S_N(y) + Σᵢ ((σᵢ + λ − ε)/2)‖yᵢ − yᵢ*‖²`.
    /// Each device storage obeys `Ṡᵢ = wᵢ − σᵢ(yᵢ−yᵢ*)ᵀẏᵢ − dᵢ` and the
    /// network storage obeys `Ṡ_N = −Σwᵢ − (λ−ε)(y−y*)ᵀẏ`, so the per-bus
    /// quadratic weights cancel every cross term and `Ẇ = −Σ dᵢ ≤ 0`.
    /// A single weight `σ_min` would leave `Σ(σ_min − σᵢ)(yᵢ−yᵢ*)ᵀẏᵢ`, which has
    /// no sign.
    pub fn lyapunov_w(&self, x: &[T], cfg: &LyapunovConfig<T>, lambda: T) -> Result<(T, T)> {
        let n = self.devices.len();
        if cfg.sigma_per_bus.len() != n {
            return Err(Error::LyapunovPrecondition(format!(
                "{} indices for {n} buses",
                cfg.sigma_per_bus.len()
            )));
        }
        if !(cfg.epsilon > T::zero()) {
            return Err(Error::LyapunovPrecondition("epsilon must be positive".into()));
        }
        if let Some((i, s)) = cfg
            .sigma_per_bus
            .iter()
            .enumerate()
            .find(|(_, s)| !(**s + lambda > cfg.epsilon))
        {
            return Err(Error::LyapunovPrecondition(format!(
                "bus {}: sigma + lambda = {} does not exceed epsilon",
                i + 1,
                *s + lambda
            )));
        }
        let storage = NetworkStorage::new(
            &self.net,
            &self.equilibrium.y_star,
            lambda,
            cfg.epsilon,
            EnergyMode::Lossless,
        )?;
        let dx = self.rhs(x);
        let y = self.output(x);
        let y_dot = self.output_rate(&dx);
        let ys = &self.equilibrium.y_star;
        let half = T::lit(0.5);
        let mut w = storage.value(&self.net, &y)?;
        let mut w_dot = storage.rate(&self.net, &y, &y_dot)?;
        for (i, d) in self.devices.iter().enumerate() {
            let r = self.range(i);
            let sigma = cfg.sigma_per_bus[i];
            w += d.storage_unchecked(&x[r.clone()], sigma);
            w_dot += d.storage_rate(&x[r.clone()], &dx[r], sigma);
            let c = sigma + lambda - cfg.epsilon;
            let (dth, dv) = (y.theta[i] - ys.theta[i], y.v[i] - ys.v[i]);
            w += half * c * (dth * dth + dv * dv);
            w_dot += c * (dth * y_dot.theta[i] + dv * y_dot.v[i]);
        }
        Ok((w, w_dot))
    }

    /// `ẏ` picked out of `ẋ`.
    pub fn output_rate(&self, dx: &[T]) -> VoltageProfile<T> {
        self.output(dx)
    }

    /// Per-bus index margins `(angle, voltage)` at the given σ values.
    pub fn proposition_margins(&self, sigma: &[T]) -> Vec<(T, T)> {
        self.devices
            .iter()
            .zip(sigma)
            .map(|(d, s)| d.proposition_margins(*s))
            .collect()
    }
}

/// Reusable buffers for [`SystemModel::rhs_into`].
#[derive(Debug, Clone)]
pub struct RhsScratch<T> {
    theta: Vec<T>,
    v: Vec<T>,
    p: Vec<T>,
    q: Vec<T>,
}

impl<T: Real> RhsScratch<T> {
    pub fn new(n: usize) -> Self {
        Self {
            theta: vec![T::zero(); n],
            v: vec![T::zero(); n],
            p: vec![T::zero(); n],
            q: vec![T::zero(); n],
        }
    }

    pub fn injections(&self) -> (&[T], &[T]) {
        (&self.p, &self.q)
    }
}

/// Verdict from a spectrum; the `structural` smallest-modulus eigenvalues are
/// removed before taking the maximum real part.
pub fn classify<T: Real>(eigenvalues: Vec<Complex<T>>, structural: usize) -> StabilityVerdict<T> {
    let zero_tol = T::lit(ZERO_EIGEN_TOL);
    let structural_zero_count = eigenvalues.iter().filter(|z| z.norm() < zero_tol).count();
    let mut by_modulus: Vec<usize> = (0..eigenvalues.len()).collect();
    by_modulus.sort_by(|&a, &b| {
        eigenvalues[a]
            .norm()
            .partial_cmp(&eigenvalues[b].norm())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let excluded: Vec<usize> = by_modulus
        .into_iter()
        .take(structural)
        .filter(|&k| eigenvalues[k].norm() < zero_tol)
        .collect();
    let max_real_part = eigenvalues
        .iter()
        .enumerate()
        .filter(|(k, _)| !excluded.contains(k))
        .map(|(_, z)| z.re)
        .fold(T::neg_infinity(), T::max);
    let margin = T::lit(STABILITY_MARGIN);
    let verdict = if max_real_part < -margin {
        Verdict::Stable
    } else if max_real_part > margin {
        Verdict::Unstable
    } else {
        Verdict::Marginal
    };
    StabilityVerdict {
        eigenvalues,
        max_real_part,
        verdict,
        stable: verdict == Verdict::Stable,
        structural_zero_count,
        excluded_structural: excluded.len(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovConfig<T> {
    pub epsilon: T,
    pub sigma_per_bus: Vec<T>,
}

impl<T: Real> LyapunovConfig<T> {
    pub fn uniform(sigma: T, n: usize) -> Self {
        Self {
            epsilon: T::lit(1e-6),
            sigma_per_bus: vec![sigma; n],
        }
    }
}

/// Synthesizes every device against the solved equilibrium and assembles the
/// closed loop.
pub fn synthesize_system<T: Real>(
    net: &NetworkModel<T>,
    equilibrium: &Equilibrium<T>,
    specs: &[DeviceSpec<T>],
    sigma: &[T],
    margins: &[Margins<T>],
    policy: GainPolicy,
) -> Result<SystemModel<T>> {
    let n = net.n();
    if specs.len() != n || sigma.len() != n || margins.len() != n {
        return Err(Error::InvalidInput("per-bus inputs must have one entry per bus".into()));
    }
    let devices = (0..n)
        .map(|i| {
            let op = BusOperatingPoint {
                theta: equilibrium.y_star.theta[i],
                v: equilibrium.y_star.v[i],
                p: equilibrium.u_star.p[i],
                q: equilibrium.u_star.q[i],
            };
            synthesize_from_sigma(&specs[i], sigma[i], margins[i], policy, op)
        })
        .collect::<Result<Vec<_>>>()?;
    SystemModel::assemble(net.clone(), devices, equilibrium.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::DeviceSpec;
    use crate::netmodel::LineParams;
    use crate::powerflow::{solve_power_flow, BusRole};

    #[test]
    fn classify_excludes_only_near_zero_structural_modes() {
        let eig = vec![
            Complex::new(-1.0, 0.0),
            Complex::new(1e-12, 0.0),
            Complex::new(-0.5, 2.0),
        ];
        let v = classify(eig.clone(), 1);
        assert_eq!(v.verdict, Verdict::Stable);
        assert_eq!(v.structural_zero_count, 1);
        assert_eq!(v.max_real_part, -0.5);
        let v = classify(eig, 0);
        assert_eq!(v.verdict, Verdict::Marginal);
        let v = classify(vec![Complex::new(0.3, 0.0), Complex::new(-2.0, 0.0)], 1);
        assert_eq!(v.excluded_structural, 0);
        assert_eq!(v.verdict, Verdict::Unstable);
    }

    #[test]
    fn weakly_coupled_droop_buses_are_stable() {
        let net = NetworkModel::build(&[LineParams::lossless(0, 1, 1e4)], 2).unwrap();
        let roles = [BusRole::Slack { theta: 0.0, v: 1.0 }, BusRole::Pq { p: 0.0, q: 0.0 }];
        let eq = solve_power_flow(&net, &roles, Default::default()).unwrap();
        let spec = DeviceSpec::ConventionalDroop { tau1: 1.0, tau2: 10.0 };
        let sys = synthesize_system(
            &net,
            &eq,
            &[spec, spec],
            &[1e6, 1e6],
            &[Margins::uniform(0.0); 2],
            GainPolicy::PositiveOnly,
        )
        .unwrap();
        let v: StabilityVerdict<f64> = sys.small_signal().unwrap();
        assert!(v.stable);
        assert!((v.max_real_part + 0.1).abs() < 1e-6);
    }

    #[test]
    fn missing_device_is_rejected() {
        let net = NetworkModel::build(&[LineParams::lossless(0, 1, 0.1)], 2).unwrap();
        let roles = [BusRole::Slack { theta: 0.0, v: 1.0 }, BusRole::Pq { p: 0.0, q: 0.0 }];
        let eq = solve_power_flow(&net, &roles, Default::default()).unwrap();
        let spec = DeviceSpec::QuadraticDroop { tau1: 1.0, tau2: 1.0 };
        let dev = synthesize_from_sigma(
            &spec,
            1.0,
            Margins::uniform(0.0),
            GainPolicy::PositiveOnly,
            BusOperatingPoint {
                theta: 0.0,
                v: 1.0,
                p: 0.0,
                q: 0.0,
            },
        )
        .unwrap();
        assert!(SystemModel::assemble(net, vec![dev], eq).is_err());
    }
}
