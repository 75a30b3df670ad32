//! Network passivity index, network storage function, incremental supply
//! rate and trajectory-based dissipation checks for bus devices.

use crate::devices::{BusOperatingPoint, DeviceKind, DeviceModel};
use crate::error::{Error, Result};
use crate::linalg::{eig_symmetric, DenseMatrix};
use crate::netmodel::{EnergyMode, NetworkModel, VoltageProfile};
use crate::scalar::{dot, norm_inf, Real};
use crate::sim::rk4_step;

/// Largest tolerated `‖∇²W_N · col(1ₙ, 0ₙ)‖∞`.
pub const KERNEL_TOL: f64 = 1e-8;

/// Per-sample tolerance on dissipation violations.
pub const DISSIPATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct PassivityReport<T> {
    /// Minimum eigenvalue of the Hessian restricted to the complement of the
    /// rotational direction.
    pub lambda: T,
    /// Full Hessian spectrum, ascending.
    pub hessian_spectrum: Vec<T>,
    /// Spectrum of the restricted operator, ascending (`2n − 1` values).
    pub deflated_spectrum: Vec<T>,
    pub structural_kernel_residual: T,
    pub deflated: bool,
}

/// Householder reflector `I − 2wwᵀ` with `w ∝ e − e₁`, which maps the unit
/// rotational direction `e = col(1ₙ, 0ₙ)/√n` onto `e₁`. Its trailing
/// `2n − 1` columns are an orthonormal basis of `e⊥`.
fn rotational_reflector<T: Real>(n: usize) -> DenseMatrix<T> {
    let dim = 2 * n;
    let inv_sqrt = T::count(n).sqrt().recip();
    let mut w = vec![T::zero(); dim];
    for wi in w.iter_mut().take(n) {
        *wi = inv_sqrt;
    }
    w[0] -= T::one();
    let wn = dot(&w, &w);
    let mut p = DenseMatrix::identity(dim);
    if wn == T::zero() {
        return p;
    }
    let c = T::lit(2.0) / wn;
    for i in 0..dim {
        for j in 0..dim {
            p[(i, j)] -= c * w[i] * w[j];
        }
    }
    p
}

/// Restricts a `2n × 2n` symmetric matrix to the orthogonal complement of
/// `col(1ₙ, 0ₙ)` and returns the `(2n − 1)`-dimensional operator.
pub fn deflate_rotational<T: Real>(h: &DenseMatrix<T>) -> DenseMatrix<T> {
    let dim = h.rows();
    let p = rotational_reflector::<T>(dim / 2);
    let full = p.matmul(h).matmul(&p);
    let mut out = DenseMatrix::zeros(dim - 1, dim - 1);
    for i in 1..dim {
        for j in 1..dim {
            // PHP is symmetric in exact arithmetic; average away rounding.
            out[(i - 1, j - 1)] = T::lit(0.5) * (full[(i, j)] + full[(j, i)]);
        }
    }
    out
}

/// λ and spectra from a precomputed energy Hessian.
pub fn lambda_from_hessian<T: Real>(h: &DenseMatrix<T>) -> Result<PassivityReport<T>> {
    let dim = h.rows();
    if !h.is_square() || dim < 4 || !dim.is_multiple_of(2) {
        return Err(Error::InvalidInput("energy Hessian must be 2n x 2n with n >= 2".into()));
    }
    let n = dim / 2;
    let mut ones = vec![T::zero(); dim];
    for o in ones.iter_mut().take(n) {
        *o = T::one();
    }
    let residual = norm_inf(&h.mul_vec(&ones));
    if !(residual < T::tol(KERNEL_TOL, h.max_abs())) {
        return Err(Error::StructuralKernel {
            residual: residual.to_f64_lossy(),
        });
    }
    let hessian_spectrum = eig_symmetric(h)?.values;
    let deflated_spectrum = eig_symmetric(&deflate_rotational(h))?.values;
    Ok(PassivityReport {
        lambda: deflated_spectrum[0],
        hessian_spectrum,
        deflated_spectrum,
        structural_kernel_residual: residual,
        deflated: true,
    })
}

/// Network passivity index at `y_star`.
pub fn network_lambda<T: Real>(
    net: &NetworkModel<T>,
    y_star: &VoltageProfile<T>,
    mode: EnergyMode,
) -> Result<PassivityReport<T>> {
    lambda_from_hessian(&net.energy_hessian(y_star, mode)?)
}

/// Incremental supply rate per bus, `wᵢ = −ΔPᵢθ̇ᵢ − Δ(Qᵢ/Vᵢ)V̇ᵢ`.
pub fn supply_rate<T: Real>(
    u: (&[T], &[T]),
    u_star: (&[T], &[T]),
    y: &VoltageProfile<T>,
    y_star: &VoltageProfile<T>,
    y_dot: &VoltageProfile<T>,
) -> Vec<T> {
    (0..y.len())
        .map(|i| {
            bus_supply_rate(
                (u.0[i], u.1[i]),
                (u_star.0[i], u_star.1[i]),
                y.v[i],
                y_star.v[i],
                (y_dot.theta[i], y_dot.v[i]),
            )
        })
        .collect()
}

/// Single-bus supply rate.
#[inline]
pub fn bus_supply_rate<T: Real>(u: (T, T), u_star: (T, T), v: T, v_star: T, y_dot: (T, T)) -> T {
    -(u.0 - u_star.0) * y_dot.0 - (u.1 / v - u_star.1 / v_star) * y_dot.1
}

/// Quadratically shifted network energy,
/// `S_N(y) = W_N(y) − (y−y*)ᵀ∇W_N(y*) − W_N(y*) − ((λ−ε)/2)‖y−y*‖²`.
#[derive(Debug, Clone)]
pub struct NetworkStorage<T> {
    y_star: Vec<T>,
    grad_star: Vec<T>,
    w_star: T,
    pub lambda: T,
    pub epsilon: T,
    pub mode: EnergyMode,
}

impl<T: Real> NetworkStorage<T> {
    pub fn new(
        net: &NetworkModel<T>,
        y_star: &VoltageProfile<T>,
        lambda: T,
        epsilon: T,
        mode: EnergyMode,
    ) -> Result<Self> {
        if !(epsilon > T::zero()) {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        Ok(Self {
            y_star: y_star.stacked(),
            grad_star: net.energy_gradient(y_star, mode)?,
            w_star: net.energy(y_star, mode)?,
            lambda,
            epsilon,
            mode,
        })
    }

    pub fn value(&self, net: &NetworkModel<T>, y: &VoltageProfile<T>) -> Result<T> {
        let ys = y.stacked();
        let dy: Vec<T> = ys.iter().zip(&self.y_star).map(|(a, b)| *a - *b).collect();
        let w = net.energy(y, self.mode)?;
        let quad = (self.lambda - self.epsilon) * T::lit(0.5) * dot(&dy, &dy);
        Ok(w - dot(&dy, &self.grad_star) - self.w_star - quad)
    }

    /// `dS_N/dt = (∇W_N(y) − ∇W_N(y*) − (λ−ε)(y−y*))ᵀẏ`.
    pub fn rate(&self, net: &NetworkModel<T>, y: &VoltageProfile<T>, y_dot: &VoltageProfile<T>) -> Result<T> {
        let g = net.energy_gradient(y, self.mode)?;
        let ys = y.stacked();
        let yd = y_dot.stacked();
        let c = self.lambda - self.epsilon;
        Ok((0..ys.len())
            .map(|k| (g[k] - self.grad_star[k] - c * (ys[k] - self.y_star[k])) * yd[k])
            .sum())
    }
}

/// Sampled open-loop device trajectory `(t, x, u, ẋ)`.
#[derive(Debug, Clone, Default)]
pub struct DeviceTrajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub inputs: Vec<(T, T)>,
    pub derivatives: Vec<Vec<T>>,
}

impl<T: Real> DeviceTrajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: T, x: Vec<T>, u: (T, T), dx: Vec<T>) {
        self.times.push(t);
        self.states.push(x);
        self.inputs.push(u);
        self.derivatives.push(dx);
    }

    /// Constant trajectory resting at the device equilibrium.
    pub fn at_rest(device: &DeviceModel<T>, t_end: T, samples: usize) -> Self {
        let op = device.operating_point();
        let x = device.equilibrium_state();
        let mut tr = Self::default();
        for k in 0..samples.max(2) {
            let t = t_end * T::count(k) / T::count(samples.max(2) - 1);
            tr.push(t, x.clone(), (op.p, op.q), vec![T::zero(); x.len()]);
        }
        tr
    }
}

/// Simulates the device alone, driven by a prescribed input signal, with
/// fixed-step RK4. Every `record_every`-th step is stored.
pub fn open_loop_trajectory<T: Real>(
    device: &DeviceModel<T>,
    x0: &[T],
    input: impl Fn(T) -> (T, T),
    t_end: T,
    step: T,
    record_every: usize,
) -> Result<DeviceTrajectory<T>> {
    let steps = (t_end / step).round().to_usize().unwrap_or(0);
    let record_every = record_every.max(1);
    let mut x = x0.to_vec();
    let mut tr = DeviceTrajectory::default();
    let record = |tr: &mut DeviceTrajectory<T>, t: T, x: &[T]| {
        let u = input(t);
        tr.push(t, x.to_vec(), u, device.rhs_vec(x, u.0, u.1));
    };
    record(&mut tr, T::zero(), &x);
    for k in 0..steps {
        let t = T::count(k) * step;
        rk4_step(
            |tt, xs: &[T], dx: &mut [T]| {
                let u = input(tt);
                device.rhs(xs, u.0, u.1, dx);
            },
            t,
            &mut x,
            step,
        );
        if !device.in_domain(&x, T::zero()) {
            return Err(Error::DomainExit(format!(
                "{} voltage non-positive at t = {}",
                device.label(),
                t + step
            )));
        }
        if (k + 1) % record_every == 0 {
            record(&mut tr, T::count(k + 1) * step, &x);
        }
    }
    Ok(tr)
}

/// Channel along which a probe trajectory moves the device output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeChannel {
    Angle,
    Voltage,
}

/// Slow raised-cosine excursion of one output channel from the equilibrium,
/// `r(t) = a(1 − cos(πt/T))/2`, with the inputs that realise it computed by
/// inverting the device dynamics. The generator integrator follows the rotor
/// angle so the probe stays on `ζ = δ − δ*`.
pub fn ramp_probe<T: Real>(
    device: &DeviceModel<T>,
    channel: ProbeChannel,
    amplitude: T,
    duration: T,
    samples: usize,
) -> DeviceTrajectory<T> {
    let op: BusOperatingPoint<T> = device.operating_point();
    let pi = T::PI();
    let half = T::lit(0.5);
    let mut tr = DeviceTrajectory::default();
    let samples = samples.max(2);
    for k in 0..samples {
        let t = duration * T::count(k) / T::count(samples - 1);
        let arg = pi * t / duration;
        let r = amplitude * half * (T::one() - arg.cos());
        let rd = amplitude * half * (pi / duration) * arg.sin();
        let rdd = amplitude * half * (pi / duration) * (pi / duration) * arg.cos();
        let (x, u) = match (&device.kind, channel) {
            (DeviceKind::Sg(s), ProbeChannel::Angle) => {
                let ph = &s.physical;
                let p = -ph.d * rd - s.k_i * r - s.k_p * rd + s.p_g_star - ph.m * rdd;
                (vec![s.delta_star + r, rd, s.e_q_star, r], (p, op.q))
            }
            (DeviceKind::Sg(s), ProbeChannel::Voltage) => {
                let ph = &s.physical;
                let e = s.e_q_star + r;
                let q = e * (-ph.t_d * rd - e - s.k_e * r + s.e_f_star) / ph.x_gap();
                (vec![s.delta_star, T::zero(), e, T::zero()], (op.p, q))
            }
            (DeviceKind::ConventionalDroop(d) | DeviceKind::QuadraticDroop(d), ProbeChannel::Angle) => {
                let p = d.p_star - (d.tau1 * rd + r) / d.d1;
                (vec![d.theta_star + r, d.v_star], (p, op.q))
            }
            (DeviceKind::ConventionalDroop(d), ProbeChannel::Voltage) => {
                let q = d.q_star - (d.tau2 * rd + r) / d.d2;
                (vec![d.theta_star, d.v_star + r], (op.p, q))
            }
            (DeviceKind::QuadraticDroop(d), ProbeChannel::Voltage) => {
                let v = d.v_star + r;
                let q = -(d.tau2 * rd + v * (v - d.u_star_qd)) / d.d2;
                (vec![d.theta_star, v], (op.p, q))
            }
        };
        let dx = device.rhs_vec(&x, u.0, u.1);
        tr.push(t, x, u, dx);
    }
    tr
}

/// Outcome of a trajectory dissipation check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationReport<T> {
    /// `max_k [Ṡ + ΔPθ̇ + Δ(Q/V)V̇ + σ(y−y*)ᵀẏ]` with `S` the device storage at
    /// its design index.
    pub pointwise: T,
    /// `max_k [∫₀^{t_k} (ΔPθ̇ + Δ(Q/V)V̇ + σ(y−y*)ᵀẏ) dt − S(x₀)]`: positive
    /// values rule out every nonnegative storage function along the path.
    pub integral: T,
}

impl<T: Real> DissipationReport<T> {
    pub fn max(&self) -> T {
        self.pointwise.max(self.integral)
    }
}

/// `ΔPθ̇ + Δ(Q/V)V̇ + σ(y−y*)ᵀẏ`, the negated OFP(σ) supply rate.
fn negated_supply<T: Real>(
    device: &DeviceModel<T>,
    op: &BusOperatingPoint<T>,
    x: &[T],
    u: (T, T),
    dx: &[T],
    sigma: T,
) -> T {
    let (it, iv) = device.output_indices();
    let (th, v) = (x[it], x[iv]);
    let (thd, vd) = (dx[it], dx[iv]);
    -bus_supply_rate(u, (op.p, op.q), v, op.v, (thd, vd)) + sigma * ((th - op.theta) * thd + (v - op.v) * vd)
}

/// Tests the OFP(σ) dissipation inequality along a sampled trajectory.
pub fn check_dissipation<T: Real>(
    device: &DeviceModel<T>,
    trajectory: &DeviceTrajectory<T>,
    sigma: T,
    op: &BusOperatingPoint<T>,
) -> Result<DissipationReport<T>> {
    if trajectory.is_empty() {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    let s_design = device.sigma_target;
    let mut pointwise = T::neg_infinity();
    let mut integral = T::neg_infinity();
    let mut acc = T::zero();
    let mut prev: Option<(T, T)> = None;
    let s0 = device.storage_unchecked(&trajectory.states[0], s_design);
    for k in 0..trajectory.len() {
        let x = &trajectory.states[k];
        let dx = &trajectory.derivatives[k];
        let t = trajectory.times[k];
        if !device.in_domain(x, T::zero()) {
            return Err(Error::DomainExit(format!("voltage non-positive at sample {k}")));
        }
        let neg_w = negated_supply(device, op, x, trajectory.inputs[k], dx, sigma);
        let rate = device.storage_rate(x, dx, s_design);
        pointwise = pointwise.max(rate + neg_w);
        if let Some((tp, wp)) = prev {
            acc += (t - tp) * T::lit(0.5) * (neg_w + wp);
        }
        integral = integral.max(acc - s0);
        prev = Some((t, neg_w));
    }
    Ok(DissipationReport { pointwise, integral })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::LineParams;

    #[test]
    fn two_bus_unloaded_lambda_is_zero() {
        let net = NetworkModel::build(&[LineParams::lossless(0, 1, 0.12)], 2).unwrap();
        let rep: PassivityReport<f64> = network_lambda(&net, &VoltageProfile::flat(2), EnergyMode::Lossless).unwrap();
        assert_eq!(rep.deflated_spectrum.len(), 3);
        assert!(rep.lambda.abs() < 1e-9);
        assert!((rep.deflated_spectrum[1] - 50.0 / 3.0).abs() < 1e-9);
        assert!((rep.deflated_spectrum[2] - 50.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn deflation_annihilates_rotational_direction() {
        let p = rotational_reflector::<f64>(3);
        let e: Vec<f64> = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0].iter().map(|x| x / 3f64.sqrt()).collect();
        let pe = p.mul_vec(&e);
        assert!((pe[0] - 1.0).abs() < 1e-15);
        assert!(pe[1..].iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn supply_rate_examples() {
        assert_eq!(bus_supply_rate((1.0, 0.5), (1.0, 0.5), 1.0, 1.0, (0.3, -0.2)), 0.0);
        assert_eq!(bus_supply_rate((1.7, 0.1), (1.0, 0.5), 1.1, 1.0, (0.0, 0.0)), 0.0);
        // ΔP = 0.5, θ̇ = 0.2, Δ(Q/V) = 0.1, V̇ = −1
        let w: f64 = bus_supply_rate((1.5, 0.6), (1.0, 0.5), 1.0, 1.0, (0.2, -1.0));
        assert!(w.abs() < 1e-15);
    }

    #[test]
    fn rejects_non_kernel_hessian() {
        let h = DenseMatrix::<f64>::identity(4);
        assert!(matches!(lambda_from_hessian(&h), Err(Error::StructuralKernel { .. })));
    }
}
