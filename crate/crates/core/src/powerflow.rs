//! Newton–Raphson power flow in polar coordinates.
//!
//! Unknowns are the angles of every non-slack bus followed by the magnitudes
//! of PQ buses; the mismatch vector is ordered the same way
//! (`ΔP` for non-slack buses, then `ΔQ` for PQ buses).

use crate::error::{Error, Result};
use crate::linalg::{solve_linear, DenseMatrix};
use crate::netmodel::{NetworkModel, PowerInjections, VoltageProfile};
use crate::scalar::{norm_inf, Real};

/// Setpoint role of a bus in the power-flow problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BusRole<T> {
    /// Reference bus with fixed angle and magnitude.
    Slack { theta: T, v: T },
    /// Fixed active injection and magnitude.
    Pv { p: T, v: T },
    /// Fixed active and reactive injection.
    Pq { p: T, q: T },
}

impl<T: Real> BusRole<T> {
    pub fn is_slack(&self) -> bool {
        matches!(self, BusRole::Slack { .. })
    }
}

/// Input-state-output triplet at an operating point. Device states are
/// filled in once the closed-loop system is assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium<T> {
    pub y_star: VoltageProfile<T>,
    pub u_star: PowerInjections<T>,
    pub device_states_star: Vec<Vec<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFlowOptions<T> {
    /// Sup-norm mismatch at which the iteration stops.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for PowerFlowOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            max_iter: 50,
        }
    }
}

/// Equilibrium plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct PowerFlowSolution<T> {
    pub equilibrium: Equilibrium<T>,
    pub iterations: usize,
    pub mismatch: T,
}

/// Multiplies every `P` and `Q` setpoint by `s`.
pub fn scale_load<T: Real>(roles: &[BusRole<T>], s: T) -> Vec<BusRole<T>> {
    roles
        .iter()
        .map(|r| match *r {
            BusRole::Slack { theta, v } => BusRole::Slack { theta, v },
            BusRole::Pv { p, v } => BusRole::Pv { p: p * s, v },
            BusRole::Pq { p, q } => BusRole::Pq { p: p * s, q: q * s },
        })
        .collect()
}

fn validate_roles<T: Real>(net: &NetworkModel<T>, roles: &[BusRole<T>]) -> Result<()> {
    if roles.len() != net.n() {
        return Err(Error::InvalidInput(format!(
            "{} bus roles for a {}-bus network",
            roles.len(),
            net.n()
        )));
    }
    let slack = roles.iter().filter(|r| r.is_slack()).count();
    if slack != 1 {
        return Err(Error::InvalidInput(format!(
            "exactly one slack bus required, found {slack}"
        )));
    }
    for r in roles {
        let ok = match *r {
            BusRole::Slack { theta, v } => theta.is_finite() && v > T::zero(),
            BusRole::Pv { p, v } => p.is_finite() && v > T::zero(),
            BusRole::Pq { p, q } => p.is_finite() && q.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidInput(format!("invalid setpoint {r:?}")));
        }
    }
    Ok(())
}

/// Solves the power flow from a flat start.
pub fn solve_power_flow<T: Real>(
    net: &NetworkModel<T>,
    roles: &[BusRole<T>],
    opts: PowerFlowOptions<T>,
) -> Result<Equilibrium<T>> {
    solve_power_flow_from(net, roles, opts, None).map(|s| s.equilibrium)
}

/// Solves the power flow, optionally warm-started from `start`.
/// Setpoint angles and magnitudes override the corresponding entries of `start`.
pub fn solve_power_flow_from<T: Real>(
    net: &NetworkModel<T>,
    roles: &[BusRole<T>],
    opts: PowerFlowOptions<T>,
    start: Option<&VoltageProfile<T>>,
) -> Result<PowerFlowSolution<T>> {
    validate_roles(net, roles)?;
    let n = net.n();
    let mut y = match start {
        Some(s) if s.len() == n && s.is_valid() => s.clone(),
        Some(_) => return Err(Error::InvalidInput("warm start has wrong shape or V <= 0".into())),
        None => VoltageProfile::flat(n),
    };
    for (i, r) in roles.iter().enumerate() {
        match *r {
            BusRole::Slack { theta, v } => {
                y.theta[i] = theta;
                y.v[i] = v;
            }
            BusRole::Pv { v, .. } => y.v[i] = v,
            BusRole::Pq { .. } => {}
        }
    }

    let ang: Vec<usize> = (0..n).filter(|&i| !roles[i].is_slack()).collect();
    let mag: Vec<usize> = (0..n).filter(|&i| matches!(roles[i], BusRole::Pq { .. })).collect();
    let p_set: Vec<T> = ang
        .iter()
        .map(|&i| match roles[i] {
            BusRole::Pv { p, .. } | BusRole::Pq { p, .. } => p,
            BusRole::Slack { .. } => unreachable!(),
        })
        .collect();
    let q_set: Vec<T> = mag
        .iter()
        .map(|&i| match roles[i] {
            BusRole::Pq { q, .. } => q,
            _ => unreachable!(),
        })
        .collect();

    let m = ang.len() + mag.len();
    let mismatch = |y: &VoltageProfile<T>| -> Result<Vec<T>> {
        let u = net.injections(y)?;
        let mut f = Vec::with_capacity(m);
        f.extend(ang.iter().zip(&p_set).map(|(&i, &p)| u.p[i] - p));
        f.extend(mag.iter().zip(&q_set).map(|(&i, &q)| u.q[i] - q));
        Ok(f)
    };

    let mut f = mismatch(&y)?;
    let mut iter = 0;
    while !(norm_inf(&f) < opts.tol) {
        if iter == opts.max_iter || f.iter().any(|x| !x.is_finite()) {
            return Err(Error::PowerFlowNonConvergence {
                iterations: iter,
                mismatch: norm_inf(&f).to_f64_lossy(),
            });
        }
        iter += 1;
        let full = net.injection_jacobian(&y)?;
        let mut jac = DenseMatrix::zeros(m, m);
        let rows = ang.iter().copied().chain(mag.iter().map(|&i| n + i));
        for (r, fr) in rows.enumerate() {
            for (c, &i) in ang.iter().enumerate() {
                jac[(r, c)] = full[(fr, i)];
            }
            for (c, &i) in mag.iter().enumerate() {
                jac[(r, ang.len() + c)] = full[(fr, n + i)];
            }
        }
        let dx = solve_linear(&jac, &f).map_err(|e| match e {
            Error::SingularMatrix { .. } => Error::SingularJacobian { iteration: iter },
            other => other,
        })?;
        for (c, &i) in ang.iter().enumerate() {
            y.theta[i] -= dx[c];
        }
        for (c, &i) in mag.iter().enumerate() {
            y.v[i] -= dx[ang.len() + c];
        }
        if !y.is_valid() {
            return Err(Error::PowerFlowNonConvergence {
                iterations: iter,
                mismatch: f64::NAN,
            });
        }
        f = mismatch(&y)?;
    }

    let u_star = net.injections(&y)?;
    Ok(PowerFlowSolution {
        equilibrium: Equilibrium {
            y_star: y,
            u_star,
            device_states_star: Vec::new(),
        },
        iterations: iter,
        mismatch: norm_inf(&f),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::LineParams;

    fn two_bus() -> NetworkModel<f64> {
        NetworkModel::build(&[LineParams::lossless(0, 1, 0.12)], 2).unwrap()
    }

    #[test]
    fn unloaded_network_stays_flat() {
        let net = two_bus();
        let roles = [BusRole::Slack { theta: 0.0, v: 1.0 }, BusRole::Pq { p: 0.0, q: 0.0 }];
        let eq = solve_power_flow(&net, &roles, Default::default()).unwrap();
        assert_eq!(eq.y_star, VoltageProfile::flat(2));
        assert!(eq.u_star.p.iter().chain(&eq.u_star.q).all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn scale_load_multiplies_injections_only() {
        let roles = [
            BusRole::Slack { theta: 0.0, v: 1.0 },
            BusRole::Pv { p: 1.0, v: 1.0 },
            BusRole::Pq { p: -1.5, q: -0.1 },
        ];
        assert_eq!(scale_load(&roles, 1.0), roles.to_vec());
        let doubled = scale_load(&roles, 2.0);
        assert_eq!(doubled[2], BusRole::Pq { p: -3.0, q: -0.2 });
        assert_eq!(doubled[1], BusRole::Pv { p: 2.0, v: 1.0 });
        let half = scale_load(&roles, 0.5);
        assert_eq!(half[2], BusRole::Pq { p: -0.75, q: -0.05 });
    }

    #[test]
    fn rejects_two_slack_buses() {
        let net = two_bus();
        let roles = [
            BusRole::Slack { theta: 0.0, v: 1.0 },
            BusRole::Slack { theta: 0.0, v: 1.0 },
        ];
        assert!(solve_power_flow(&net, &roles, Default::default()).is_err());
    }

    #[test]
    fn infeasible_load_does_not_converge() {
        let net = two_bus();
        let roles = [BusRole::Slack { theta: 0.0, v: 1.0 }, BusRole::Pq { p: -20.0, q: 0.0 }];
        let err = solve_power_flow(&net, &roles, Default::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::PowerFlowNonConvergence { .. } | Error::SingularJacobian { .. }
        ));
    }
}
