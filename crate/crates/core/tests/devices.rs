mod common;

use passivity_core::devices::{synthesize_from_sigma, BusOperatingPoint, DeviceModel, GainPolicy, Margins};
use passivity_core::passivity::{bus_supply_rate, check_dissipation, open_loop_trajectory, ramp_probe, ProbeChannel};
use passivity_core::powerflow::solve_power_flow;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIGMA: f64 = 0.5;

fn devices(margins: Margins<f64>) -> Vec<DeviceModel<f64>> {
    let net = common::triangle::<f64>(0.0);
    let eq = solve_power_flow(&net, &common::roles(), Default::default()).unwrap();
    common::specs()
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let op = BusOperatingPoint {
                theta: eq.y_star.theta[i],
                v: eq.y_star.v[i],
                p: eq.u_star.p[i],
                q: eq.u_star.q[i],
            };
            synthesize_from_sigma(spec, SIGMA, margins, GainPolicy::PositiveOnly, op).unwrap()
        })
        .collect()
}

#[test]
fn equilibrium_is_a_rest_point() {
    for d in devices(Margins::uniform(0.0)) {
        let op = d.operating_point();
        let dx = d.rhs_vec(&d.equilibrium_state(), op.p, op.q);
        assert!(dx.iter().all(|v| v.abs() < 1e-12), "{}: {dx:?}", d.label());
    }
}

/// `Ṡ − w + σΔyᵀẏ = −d + offset` at arbitrary states and inputs.
#[test]
fn storage_identity_holds_pointwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for d in devices(Margins {
        angle: 0.2,
        voltage: -0.05,
    }) {
        let op = d.operating_point();
        let (it, iv) = d.output_indices();
        for _ in 0..200 {
            let x: Vec<f64> = d
                .equilibrium_state()
                .iter()
                .map(|v| v + rng.gen_range(-0.3..0.3))
                .collect();
            let u = (op.p + rng.gen_range(-1.0..1.0), op.q + rng.gen_range(-1.0..1.0));
            let dx = d.rhs_vec(&x, u.0, u.1);
            let rate = d.storage_rate(&x, &dx, SIGMA);
            let w = bus_supply_rate(u, (op.p, op.q), x[iv], op.v, (dx[it], dx[iv]));
            let lhs = rate - w + SIGMA * ((x[it] - op.theta) * dx[it] + (x[iv] - op.v) * dx[iv]);
            let rhs = -d.dissipation(&x, &dx) + d.integrator_offset_term(&x, SIGMA);
            assert!(
                (lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0),
                "{}: {lhs} vs {rhs}",
                d.label()
            );
        }
    }
}

#[test]
fn positive_margin_never_violates() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for d in devices(Margins::uniform(0.1)) {
        let op = d.operating_point();
        for _ in 0..30 {
            let mut x0: Vec<f64> = d
                .equilibrium_state()
                .iter()
                .map(|v| v + rng.gen_range(-0.05..0.05))
                .collect();
            if d.state_dim() == 4 {
                x0[3] = x0[0] - op.theta;
            }
            let (a, b, w) = (
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
                rng.gen_range(0.3..4.0),
            );
            let tr = open_loop_trajectory(
                &d,
                &x0,
                |t| (op.p + a * (w * t).sin(), op.q + b * (1.3 * w * t).cos()),
                5.0,
                1e-3,
                1,
            )
            .unwrap();
            let v = check_dissipation(&d, &tr, SIGMA, &op).unwrap().max();
            assert!(v <= 1e-6, "{}: {v}", d.label());
        }
    }
}

#[test]
fn negative_margin_is_exposed_by_a_probe() {
    for (channel, m) in [
        (
            ProbeChannel::Angle,
            Margins {
                angle: -0.1,
                voltage: 0.1,
            },
        ),
        (
            ProbeChannel::Voltage,
            Margins {
                angle: 0.1,
                voltage: -0.1,
            },
        ),
    ] {
        for d in devices(m) {
            let op = d.operating_point();
            let tr = ramp_probe(&d, channel, 0.1, 5000.0, 20001);
            let v = check_dissipation(&d, &tr, SIGMA, &op).unwrap().max();
            assert!(v > 1e-4, "{} {channel:?}: {v}", d.label());
            assert!(d.storage_value(&d.equilibrium_state(), SIGMA).is_err());
        }
    }
}

#[test]
fn probe_inputs_reproduce_the_prescribed_output() {
    for d in devices(Margins::uniform(0.1)) {
        for channel in [ProbeChannel::Angle, ProbeChannel::Voltage] {
            let tr = ramp_probe(&d, channel, 0.05, 10.0, 101);
            let (it, iv) = d.output_indices();
            let k = if channel == ProbeChannel::Angle { it } else { iv };
            // Recorded derivative of the probed output equals the analytic ramp rate.
            for (t, dx) in tr.times.iter().zip(&tr.derivatives) {
                let expect = 0.05 * 0.5 * (std::f64::consts::PI / 10.0) * (std::f64::consts::PI * t / 10.0).sin();
                assert!((dx[k] - expect).abs() < 1e-9, "{} {channel:?}", d.label());
            }
        }
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let spec = passivity_core::devices::DeviceSpec::ConventionalDroop { tau1: -1.0, tau2: 1.0 };
    let op = BusOperatingPoint {
        theta: 0.0,
        v: 1.0,
        p: 0.0,
        q: 0.0,
    };
    assert!(synthesize_from_sigma(&spec, 0.5, Margins::uniform(0.0), GainPolicy::PositiveOnly, op).is_err());
    let qd = passivity_core::devices::DeviceSpec::QuadraticDroop { tau1: 1.0, tau2: 1.0 };
    assert!(synthesize_from_sigma(&qd, -0.5, Margins::uniform(0.0), GainPolicy::PositiveOnly, op).is_err());
    assert!(synthesize_from_sigma(&qd, -0.5, Margins::uniform(0.0), GainPolicy::Literal, op).is_ok());
}
