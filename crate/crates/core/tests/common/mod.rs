#![allow(dead_code)]

use passivity_core::devices::{DeviceSpec, SgPhysical};
use passivity_core::netmodel::{LineParams, NetworkModel};
use passivity_core::powerflow::BusRole;
use passivity_core::Real;

/// Three buses on a triangle of identical lines, `r` on every line.
pub fn triangle<T: Real>(r: f64) -> NetworkModel<T> {
    let l = |a, b| LineParams::new(a, b, T::lit(r), T::lit(0.12));
    NetworkModel::build(&[l(0, 1), l(1, 2), l(0, 2)], 3).unwrap()
}

pub fn roles<T: Real>() -> Vec<BusRole<T>> {
    vec![
        BusRole::Slack {
            theta: T::zero(),
            v: T::one(),
        },
        BusRole::Pv {
            p: T::one(),
            v: T::one(),
        },
        BusRole::Pq {
            p: T::lit(-1.5),
            q: T::lit(-0.1),
        },
    ]
}

pub fn specs<T: Real>() -> Vec<DeviceSpec<T>> {
    vec![
        DeviceSpec::Sg {
            physical: SgPhysical {
                m: T::lit(0.16),
                d: T::lit(0.076),
                t_d: T::lit(6.56),
                x_d: T::lit(0.295),
                x_d_prime: T::lit(0.17),
            },
            k_p: T::lit(0.1),
        },
        DeviceSpec::QuadraticDroop {
            tau1: T::lit(0.3),
            tau2: T::lit(8.0),
        },
        DeviceSpec::ConventionalDroop {
            tau1: T::one(),
            tau2: T::lit(10.0),
        },
    ]
}
