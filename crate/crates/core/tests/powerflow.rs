mod common;

use passivity_core::netmodel::{LineParams, NetworkModel};
use passivity_core::powerflow::{scale_load, solve_power_flow, solve_power_flow_from, BusRole, PowerFlowOptions};

/// Root of `sin(θ)/x = p` on `[−π/2, π/2]` by bisection.
fn two_bus_angle(p: f64, x: f64) -> f64 {
    let f = |t: f64| t.sin() / x - p;
    let (mut lo, mut hi) = (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn two_bus_matches_bisection() {
    let net = NetworkModel::build(&[LineParams::lossless(0, 1, 0.12)], 2).unwrap();
    for p in [-1.0, -0.5, 0.3, 2.0] {
        let roles = [BusRole::Slack { theta: 0.0, v: 1.0 }, BusRole::Pv { p, v: 1.0 }];
        let eq = solve_power_flow(&net, &roles, PowerFlowOptions::default()).unwrap();
        assert!((eq.y_star.theta[1] - two_bus_angle(p, 0.12)).abs() < 1e-9);
    }
    let roles = [BusRole::Slack { theta: 0.0, v: 1.0 }, BusRole::Pv { p: -1.0, v: 1.0 }];
    let eq = solve_power_flow(&net, &roles, PowerFlowOptions::default()).unwrap();
    assert!((eq.y_star.theta[1] + 0.120290).abs() < 1e-6);
    // The slack absorbs the load; the injections are consistent with y*.
    assert!((eq.u_star.p[0] - 1.0).abs() < 1e-9);
}

#[test]
fn three_bus_base_case() {
    let net = common::triangle::<f64>(0.0);
    let sol = solve_power_flow_from(&net, &common::roles(), PowerFlowOptions::default(), None).unwrap();
    assert!(sol.iterations <= 10, "{} iterations", sol.iterations);
    assert!(sol.mismatch < 1e-10);
    let y = &sol.equilibrium.y_star;
    assert!(y.v[2] < 1.0);
    assert!((y.theta[1] - 0.020097).abs() < 1e-6);
    assert!((y.theta[2] + 0.081014).abs() < 1e-6);
    assert!((y.v[2] - 0.98974).abs() < 1e-5);
}

#[test]
fn warm_start_reaches_same_solution() {
    let net = common::triangle::<f64>(0.01);
    let roles = scale_load(&common::roles(), 2.0);
    let cold = solve_power_flow_from(&net, &roles, PowerFlowOptions::default(), None).unwrap();
    let near = solve_power_flow(&net, &scale_load(&common::roles(), 1.9), PowerFlowOptions::default()).unwrap();
    let warm = solve_power_flow_from(&net, &roles, PowerFlowOptions::default(), Some(&near.y_star)).unwrap();
    assert!(warm.iterations <= cold.iterations);
    let (a, b) = (&cold.equilibrium.y_star, &warm.equilibrium.y_star);
    for i in 0..3 {
        assert!((a.theta[i] - b.theta[i]).abs() < 1e-9 && (a.v[i] - b.v[i]).abs() < 1e-9);
    }
}

#[test]
fn infeasible_load_does_not_converge() {
    let net = common::triangle::<f64>(0.0);
    let roles = scale_load(&common::roles(), 50.0);
    assert!(solve_power_flow(&net, &roles, PowerFlowOptions::default()).is_err());
}

#[test]
fn single_precision_solves_the_base_case() {
    let net = common::triangle::<f32>(0.0);
    let eq = solve_power_flow(
        &net,
        &common::roles::<f32>(),
        PowerFlowOptions {
            tol: 1e-5,
            max_iter: 50,
        },
    )
    .unwrap();
    assert!((eq.y_star.theta[2] + 0.081014).abs() < 1e-4);
    assert!((eq.y_star.v[2] - 0.98974).abs() < 1e-4);
}
