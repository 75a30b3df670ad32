use passivity_core::netmodel::{EnergyMode, LineParams, NetworkModel, VoltageProfile};
use proptest::prelude::*;

/// Connected network: a random spanning tree plus optional chords.
fn network() -> impl Strategy<Value = NetworkModel<f64>> {
    (2usize..=8)
        .prop_flat_map(|n| {
            let tree = proptest::collection::vec((any::<prop::sample::Index>(), 0.05f64..0.5), n - 1);
            let chords = proptest::collection::vec((0..n, 0..n, 0.05f64..0.5), 0..n);
            (Just(n), tree, chords)
        })
        .prop_map(|(n, tree, chords)| {
            let mut lines: Vec<LineParams<f64>> = Vec::new();
            for (j, (idx, x)) in tree.into_iter().enumerate() {
                lines.push(LineParams::lossless(idx.index(j + 1), j + 1, x));
            }
            for (a, b, x) in chords {
                let (a, b) = (a.min(b), a.max(b));
                if a != b && !lines.iter().any(|l| l.from.min(l.to) == a && l.from.max(l.to) == b) {
                    lines.push(LineParams::lossless(a, b, x));
                }
            }
            NetworkModel::build(&lines, n).unwrap()
        })
}

fn with_profile() -> impl Strategy<Value = (NetworkModel<f64>, VoltageProfile<f64>)> {
    network().prop_flat_map(|net| {
        let n = net.n();
        (
            Just(net),
            proptest::collection::vec(-0.7f64..0.7, n),
            proptest::collection::vec(0.8f64..1.2, n),
        )
            .prop_map(|(net, th, v)| (net, VoltageProfile::new(th, v)))
    })
}

proptest! {
    #[test]
    fn gradient_is_p_and_q_over_v((net, y) in with_profile()) {
        let g = net.energy_gradient(&y, EnergyMode::Lossless).unwrap();
        let inj = net.injections(&y).unwrap();
        let n = net.n();
        for i in 0..n {
            prop_assert!((g[i] - inj.p[i]).abs() < 1e-8);
            prop_assert!((g[n + i] - inj.q[i] / y.v[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn hessian_matches_central_differences((net, y) in with_profile()) {
        let h = net.energy_hessian(&y, EnergyMode::Lossless).unwrap();
        let ys = y.stacked();
        let step = 1e-6;
        for j in 0..ys.len() {
            let (mut p, mut m) = (ys.clone(), ys.clone());
            p[j] += step;
            m[j] -= step;
            let gp = net.energy_gradient(&VoltageProfile::from_stacked(&p), EnergyMode::Lossless).unwrap();
            let gm = net.energy_gradient(&VoltageProfile::from_stacked(&m), EnergyMode::Lossless).unwrap();
            for i in 0..ys.len() {
                let fd = (gp[i] - gm[i]) / (2.0 * step);
                let a = h.row(i)[j];
                prop_assert!((a - fd).abs() <= 1e-6 * a.abs().max(1.0), "H[{i}][{j}] = {a}, fd = {fd}");
            }
        }
    }

    #[test]
    fn uniform_angle_shift_leaves_everything_unchanged((net, y) in with_profile(), c in -3.0f64..3.0) {
        let z = y.shifted(c);
        let (a, b) = (net.injections(&y).unwrap(), net.injections(&z).unwrap());
        prop_assert!(a.max_abs_diff(&b) < 1e-10);
        let (wa, wb) = (net.energy(&y, EnergyMode::Lossless).unwrap(), net.energy(&z, EnergyMode::Lossless).unwrap());
        prop_assert!((wa - wb).abs() < 1e-9 * wa.abs().max(1.0));
    }

    #[test]
    fn lossless_active_power_balances((net, y) in with_profile()) {
        let p = net.injections(&y).unwrap().p;
        let scale: f64 = p.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        prop_assert!(p.iter().sum::<f64>().abs() < 1e-12 * scale);
    }

    #[test]
    fn hessian_annihilates_rotation((net, y) in with_profile()) {
        let h = net.energy_hessian(&y, EnergyMode::Lossless).unwrap();
        let n = net.n();
        let e: Vec<f64> = (0..2 * n).map(|k| if k < n { 1.0 } else { 0.0 }).collect();
        let he = h.mul_vec(&e);
        prop_assert!(he.iter().all(|v| v.abs() < 1e-8));
    }
}

#[test]
fn lossy_energy_requires_explicit_mode() {
    let net = NetworkModel::build(&[LineParams::new(0, 1, 0.01, 0.12)], 2).unwrap();
    let y = VoltageProfile::flat(2);
    assert!(net.energy(&y, EnergyMode::Lossless).is_err());
    assert!(net.energy(&y, EnergyMode::SusceptanceOnly).is_ok());
}

#[test]
fn invalid_topologies_are_rejected() {
    let l = LineParams::lossless;
    assert!(NetworkModel::<f64>::build(&[l(0, 1, 0.1), l(1, 0, 0.2)], 2).is_err());
    assert!(NetworkModel::<f64>::build(&[l(0, 0, 0.1)], 2).is_err());
    assert!(NetworkModel::<f64>::build(&[l(0, 1, 0.1)], 3).is_err());
    assert!(NetworkModel::<f64>::build(&[l(0, 1, -0.1)], 2).is_err());
    assert!(NetworkModel::<f64>::build(&[l(0, 5, 0.1)], 2).is_err());
}
