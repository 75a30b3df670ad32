//! Bus dynamics: flux-decay synchronous generator with PI frequency and
//! proportional excitation control, conventional droop, and quadratic droop.
//!
//! Every device maps the bus injection `(P, Q)` to the bus voltage `(θ, V)`,
//! which is a pair of its own states. Storage functions are written so that
//! `S(x*) = 0` and
//!
//! ```text
//! Ṡ = −ΔP·θ̇ − Δ(Q/V)·V̇ − σ·(y − y*)ᵀẏ − dissipation(x, ẋ)
//! ```
//!
//! holds identically, with `dissipation ≥ 0` whenever the gains are positive.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Real;

/// Physical flux-decay generator data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgPhysical<T> {
    /// Inertia.
    pub m: T,
    /// Damping.
    pub d: T,
    /// q-axis open-circuit transient time constant `T′_d`.
    pub t_d: T,
    pub x_d: T,
    pub x_d_prime: T,
}

impl<T: Real> SgPhysical<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.m > T::zero()
            && self.d >= T::zero()
            && self.t_d > T::zero()
            && self.x_d_prime > T::zero()
            && self.x_d > self.x_d_prime;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid generator data {self:?}")))
        }
    }

    /// `x_d − x′_d`.
    #[inline]
    pub fn x_gap(&self) -> T {
        self.x_d - self.x_d_prime
    }
}

/// Synthesized generator: physical data, controller gains and steady inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgParams<T> {
    pub physical: SgPhysical<T>,
    pub k_i: T,
    pub k_p: T,
    pub k_e: T,
    pub p_g_star: T,
    pub e_f_star: T,
    pub e_q_star: T,
    pub delta_star: T,
}

/// Droop inverter parameters. `k_cd` is used by the conventional variant and
/// `u_star_qd` by the quadratic one; both are filled in at synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroopParams<T> {
    pub tau1: T,
    pub tau2: T,
    pub d1: T,
    pub d2: T,
    pub theta_star: T,
    pub v_star: T,
    pub p_star: T,
    pub q_star: T,
    pub u_star_qd: T,
    pub k_cd: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeviceKind<T> {
    Sg(SgParams<T>),
    ConventionalDroop(DroopParams<T>),
    QuadraticDroop(DroopParams<T>),
}

/// Unsynthesized device description: only the data that does not depend on σ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeviceSpec<T> {
    Sg { physical: SgPhysical<T>, k_p: T },
    ConventionalDroop { tau1: T, tau2: T },
    QuadraticDroop { tau1: T, tau2: T },
}

impl<T: Real> DeviceSpec<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DeviceSpec::Sg { physical, k_p } => {
                physical.validate()?;
                if !(k_p > T::zero()) {
                    return Err(Error::InvalidInput("K_P must be positive".into()));
                }
                Ok(())
            }
            DeviceSpec::ConventionalDroop { tau1, tau2 } | DeviceSpec::QuadraticDroop { tau1, tau2 } => {
                if tau1 > T::zero() && tau2 > T::zero() {
                    Ok(())
                } else {
                    Err(Error::InvalidInput("droop time constants must be positive".into()))
                }
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            DeviceSpec::Sg { .. } => "SG",
            DeviceSpec::ConventionalDroop { .. } => "CD",
            DeviceSpec::QuadraticDroop { .. } => "QD",
        }
    }
}

/// How to treat droop gains when `σ + margin` is not positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainPolicy {
    /// Reject non-positive droop gains.
    #[default]
    PositiveOnly,
    /// Use the boundary formula verbatim, allowing negative droop gains.
    Literal,
}

/// Margins added to the two gain bounds of a device: the angle channel
/// (`K_I` or `D₁⁻¹`) and the voltage channel (`K_E` or `D₂⁻¹`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margins<T> {
    pub angle: T,
    pub voltage: T,
}

impl<T: Real> Margins<T> {
    pub fn uniform(m: T) -> Self {
        Self { angle: m, voltage: m }
    }
}

/// Steady-state bus quantities a device is synthesized against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusOperatingPoint<T> {
    pub theta: T,
    pub v: T,
    pub p: T,
    pub q: T,
}

/// A synthesized device together with the index it was designed for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceModel<T> {
    pub kind: DeviceKind<T>,
    pub sigma_target: T,
}

const SG_NAMES: [&str; 4] = ["delta", "omega", "eq", "zeta"];
const DROOP_NAMES: [&str; 2] = ["theta", "v"];

/// Synthesizes controller gains so the device sits on (or `margins` away
/// from) the OFP(σ) boundary, and back-computes its steady inputs from `op`.
pub fn synthesize_from_sigma<T: Real>(
    spec: &DeviceSpec<T>,
    sigma: T,
    margins: Margins<T>,
    policy: GainPolicy,
    op: BusOperatingPoint<T>,
) -> Result<DeviceModel<T>> {
    spec.validate()?;
    if !(op.v > T::zero()) {
        return Err(Error::Synthesis("equilibrium voltage must be positive".into()));
    }
    let tiny = T::lit(1e-12);
    let check_gain = |inv: T, name: &str| -> Result<()> {
        let bad = match policy {
            GainPolicy::PositiveOnly => !(inv > T::zero()),
            GainPolicy::Literal => !(inv.abs() > tiny),
        };
        if bad {
            Err(Error::Synthesis(format!(
                "{name}⁻¹ = {inv} gives an inadmissible droop gain"
            )))
        } else {
            Ok(())
        }
    };
    let kind = match *spec {
        DeviceSpec::Sg { physical, k_p } => {
            let x = physical.x_gap();
            let e = op.v;
            DeviceKind::Sg(SgParams {
                physical,
                k_i: sigma + margins.angle,
                k_p,
                k_e: x * sigma - T::one() + margins.voltage,
                p_g_star: op.p,
                e_f_star: e + x * op.q / e,
                e_q_star: e,
                delta_star: op.theta,
            })
        }
        DeviceSpec::ConventionalDroop { tau1, tau2 } => {
            let d1_inv = sigma + margins.angle;
            let d2_inv = (op.v * op.v * sigma - op.q) / op.v + margins.voltage;
            check_gain(d1_inv, "D1")?;
            check_gain(d2_inv, "D2")?;
            let (d1, d2) = (d1_inv.recip(), d2_inv.recip());
            DeviceKind::ConventionalDroop(droop(tau1, tau2, d1, d2, op))
        }
        DeviceSpec::QuadraticDroop { tau1, tau2 } => {
            let d1_inv = sigma + margins.angle;
            let d2_inv = sigma + margins.voltage;
            check_gain(d1_inv, "D1")?;
            check_gain(d2_inv, "D2")?;
            DeviceKind::QuadraticDroop(droop(tau1, tau2, d1_inv.recip(), d2_inv.recip(), op))
        }
    };
    Ok(DeviceModel {
        kind,
        sigma_target: sigma,
    })
}

fn droop<T: Real>(tau1: T, tau2: T, d1: T, d2: T, op: BusOperatingPoint<T>) -> DroopParams<T> {
    DroopParams {
        tau1,
        tau2,
        d1,
        d2,
        theta_star: op.theta,
        v_star: op.v,
        p_star: op.p,
        q_star: op.q,
        u_star_qd: op.v + d2 * op.q / op.v,
        k_cd: d2 * op.q + op.v,
    }
}

/// `ẋ` of the generator for injection `(p, q)`.
pub fn sg_rhs<T: Real>(s: &SgParams<T>, x: &[T], p: T, q: T, dx: &mut [T]) {
    let ph = &s.physical;
    let (omega, e, zeta) = (x[1], x[2], x[3]);
    let pg = -s.k_i * zeta - s.k_p * omega + s.p_g_star;
    let ef = -s.k_e * (e - s.e_q_star) + s.e_f_star;
    dx[0] = omega;
    dx[1] = (-ph.d * omega - p + pg) / ph.m;
    dx[2] = (-e - ph.x_gap() * q / e + ef) / ph.t_d;
    dx[3] = omega;
}

/// `ẋ` of the conventional droop inverter.
pub fn cd_rhs<T: Real>(d: &DroopParams<T>, x: &[T], p: T, q: T, dx: &mut [T]) {
    dx[0] = (-(x[0] - d.theta_star) - d.d1 * (p - d.p_star)) / d.tau1;
    dx[1] = (-(x[1] - d.v_star) - d.d2 * (q - d.q_star)) / d.tau2;
}

/// `ẋ` of the quadratic droop inverter.
pub fn qd_rhs<T: Real>(d: &DroopParams<T>, x: &[T], p: T, q: T, dx: &mut [T]) {
    dx[0] = (-(x[0] - d.theta_star) - d.d1 * (p - d.p_star)) / d.tau1;
    dx[1] = (-d.d2 * q - x[1] * (x[1] - d.u_star_qd)) / d.tau2;
}

impl<T: Real> DeviceModel<T> {
    pub fn label(&self) -> &'static str {
        match self.kind {
            DeviceKind::Sg(_) => "SG",
            DeviceKind::ConventionalDroop(_) => "CD",
            DeviceKind::QuadraticDroop(_) => "QD",
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_names().len()
    }

    pub fn state_names(&self) -> &'static [&'static str] {
        match self.kind {
            DeviceKind::Sg(_) => &SG_NAMES,
            _ => &DROOP_NAMES,
        }
    }

    /// Positions of `(θ, V)` inside the device state.
    pub fn output_indices(&self) -> (usize, usize) {
        match self.kind {
            DeviceKind::Sg(_) => (0, 2),
            _ => (0, 1),
        }
    }

    pub fn output(&self, x: &[T]) -> (T, T) {
        let (a, b) = self.output_indices();
        (x[a], x[b])
    }

    pub fn equilibrium_state(&self) -> Vec<T> {
        match self.kind {
            DeviceKind::Sg(s) => vec![s.delta_star, T::zero(), s.e_q_star, T::zero()],
            DeviceKind::ConventionalDroop(d) | DeviceKind::QuadraticDroop(d) => vec![d.theta_star, d.v_star],
        }
    }

    /// `(θ*, V*, P*, Q*)` the device was synthesized against.
    pub fn operating_point(&self) -> BusOperatingPoint<T> {
        match self.kind {
            DeviceKind::Sg(s) => BusOperatingPoint {
                theta: s.delta_star,
                v: s.e_q_star,
                p: s.p_g_star,
                q: (s.e_f_star - s.e_q_star) * s.e_q_star / s.physical.x_gap(),
            },
            DeviceKind::ConventionalDroop(d) | DeviceKind::QuadraticDroop(d) => BusOperatingPoint {
                theta: d.theta_star,
                v: d.v_star,
                p: d.p_star,
                q: d.q_star,
            },
        }
    }

    /// Output voltage magnitude is positive.
    pub fn in_domain(&self, x: &[T], floor: T) -> bool {
        self.output(x).1 > floor
    }

    pub fn rhs(&self, x: &[T], p: T, q: T, dx: &mut [T]) {
        match &self.kind {
            DeviceKind::Sg(s) => sg_rhs(s, x, p, q, dx),
            DeviceKind::ConventionalDroop(d) => cd_rhs(d, x, p, q, dx),
            DeviceKind::QuadraticDroop(d) => qd_rhs(d, x, p, q, dx),
        }
    }

    pub fn rhs_vec(&self, x: &[T], p: T, q: T) -> Vec<T> {
        let mut dx = vec![T::zero(); self.state_dim()];
        self.rhs(x, p, q, &mut dx);
        dx
    }

    /// `∂ẋ/∂x`.
    pub fn jacobian_x(&self, x: &[T], _p: T, q: T) -> DenseMatrix<T> {
        let n = self.state_dim();
        let mut j = DenseMatrix::zeros(n, n);
        match &self.kind {
            DeviceKind::Sg(s) => {
                let ph = &s.physical;
                let e = x[2];
                j[(0, 1)] = T::one();
                j[(1, 1)] = -(ph.d + s.k_p) / ph.m;
                j[(1, 3)] = -s.k_i / ph.m;
                j[(2, 2)] = (-T::one() + ph.x_gap() * q / (e * e) - s.k_e) / ph.t_d;
                j[(3, 1)] = T::one();
            }
            DeviceKind::ConventionalDroop(d) => {
                j[(0, 0)] = -d.tau1.recip();
                j[(1, 1)] = -d.tau2.recip();
            }
            DeviceKind::QuadraticDroop(d) => {
                j[(0, 0)] = -d.tau1.recip();
                j[(1, 1)] = -(x[1] + x[1] - d.u_star_qd) / d.tau2;
            }
        }
        j
    }

    /// `∂ẋ/∂(P, Q)`, a `dim × 2` matrix.
    pub fn jacobian_u(&self, x: &[T]) -> DenseMatrix<T> {
        let n = self.state_dim();
        let mut j = DenseMatrix::zeros(n, 2);
        match &self.kind {
            DeviceKind::Sg(s) => {
                let ph = &s.physical;
                j[(1, 0)] = -ph.m.recip();
                j[(2, 1)] = -ph.x_gap() / (x[2] * ph.t_d);
            }
            DeviceKind::ConventionalDroop(d) | DeviceKind::QuadraticDroop(d) => {
                j[(0, 0)] = -d.d1 / d.tau1;
                j[(1, 1)] = -d.d2 / d.tau2;
            }
        }
        j
    }

    /// Per-channel slack in the OFP(σ) gain inequalities; both entries must be
    /// positive for the storage function to have a strict minimum.
    pub fn proposition_margins(&self, sigma: T) -> (T, T) {
        match &self.kind {
            DeviceKind::Sg(s) => (s.k_i - sigma, (s.k_e + T::one()) / s.physical.x_gap() - sigma),
            DeviceKind::ConventionalDroop(d) => (
                d.d1.recip() - sigma,
                d.d2.recip() - (d.v_star * d.v_star * sigma - d.q_star) / d.v_star,
            ),
            DeviceKind::QuadraticDroop(d) => (d.d1.recip() - sigma, d.d2.recip() - sigma),
        }
    }

    /// Storage value without checking positive definiteness.
    pub fn storage_unchecked(&self, x: &[T], sigma: T) -> T {
        let half = T::lit(0.5);
        match &self.kind {
            DeviceKind::Sg(s) => {
                let de = x[2] - s.e_q_star;
                let c_e = (s.k_e + T::one()) / s.physical.x_gap() - sigma;
                half * s.physical.m * x[1] * x[1] + half * (s.k_i - sigma) * x[3] * x[3] + half * c_e * de * de
            }
            DeviceKind::ConventionalDroop(d) => {
                let dth = x[0] - d.theta_star;
                let v = x[1];
                let dv = v - d.v_star;
                let c = d.k_cd / d.d2;
                half * (d.d1.recip() - sigma) * dth * dth + c * (v / d.v_star - v.ln())
                    - half * sigma * dv * dv
                    - c * (T::one() - d.v_star.ln())
            }
            DeviceKind::QuadraticDroop(d) => {
                let dth = x[0] - d.theta_star;
                let dv = x[1] - d.v_star;
                half * (d.d1.recip() - sigma) * dth * dth + half * (d.d2.recip() - sigma) * dv * dv
            }
        }
    }

    /// Storage value; errors if the gains do not give a strict local minimum at `x*`.
    pub fn storage_value(&self, x: &[T], sigma: T) -> Result<T> {
        let (a, b) = self.proposition_margins(sigma);
        if !(a > T::zero() && b > T::zero()) {
            return Err(Error::StorageIndefinite(format!(
                "{} margins ({a}, {b}) at sigma = {sigma}",
                self.label()
            )));
        }
        Ok(self.storage_unchecked(x, sigma))
    }

    /// `∇S(x)`.
    pub fn storage_gradient(&self, x: &[T], sigma: T) -> Vec<T> {
        match &self.kind {
            DeviceKind::Sg(s) => {
                let c_e = (s.k_e + T::one()) / s.physical.x_gap() - sigma;
                vec![
                    T::zero(),
                    s.physical.m * x[1],
                    c_e * (x[2] - s.e_q_star),
                    (s.k_i - sigma) * x[3],
                ]
            }
            DeviceKind::ConventionalDroop(d) => {
                let v = x[1];
                vec![
                    (d.d1.recip() - sigma) * (x[0] - d.theta_star),
                    d.k_cd / d.d2 * (d.v_star.recip() - v.recip()) - sigma * (v - d.v_star),
                ]
            }
            DeviceKind::QuadraticDroop(d) => vec![
                (d.d1.recip() - sigma) * (x[0] - d.theta_star),
                (d.d2.recip() - sigma) * (x[1] - d.v_star),
            ],
        }
    }

    /// `Ṡ = ∇S · ẋ`.
    pub fn storage_rate(&self, x: &[T], xdot: &[T], sigma: T) -> T {
        crate::scalar::dot(&self.storage_gradient(x, sigma), xdot)
    }

    /// Nonnegative dissipation term of the storage identity for gains of the
    /// admissible sign.
    pub fn dissipation(&self, x: &[T], xdot: &[T]) -> T {
        match &self.kind {
            DeviceKind::Sg(s) => {
                let ph = &s.physical;
                (ph.d + s.k_p) * x[1] * x[1] + ph.t_d * xdot[2] * xdot[2] / ph.x_gap()
            }
            DeviceKind::ConventionalDroop(d) | DeviceKind::QuadraticDroop(d) => {
                d.tau1 * xdot[0] * xdot[0] / d.d1 + d.tau2 * xdot[1] * xdot[1] / (d.d2 * x[1])
            }
        }
    }

    /// `σ(δ − δ* − ζ)ω` for the generator, zero otherwise. Vanishes on the
    /// invariant set `ζ = δ − δ*`, which contains the equilibrium.
    pub fn integrator_offset_term(&self, x: &[T], sigma: T) -> T {
        match &self.kind {
            DeviceKind::Sg(s) => sigma * (x[0] - s.delta_star - x[3]) * x[1],
            _ => T::zero(),
        }
    }

    /// Number of eigenvalues fixed at zero by construction (the generator
    /// integrator duplicates the rotor-angle equation).
    pub fn structural_zeros(&self) -> usize {
        match self.kind {
            DeviceKind::Sg(_) => 1,
            _ => 0,
        }
    }
}
