//! Passivity-index stability analysis for power networks with heterogeneous
//! bus dynamics.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the common double-precision instantiations.

// `!(a > b)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod devices;
pub mod error;
pub mod linalg;
pub mod netmodel;
pub mod passivity;
pub mod powerflow;
pub mod scalar;
pub mod sim;
pub mod system;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Network = netmodel::NetworkModel<f64>;
pub type Network32 = netmodel::NetworkModel<f32>;
pub type Matrix = linalg::DenseMatrix<f64>;
pub type Matrix32 = linalg::DenseMatrix<f32>;
pub type Device = devices::DeviceModel<f64>;
pub type System = system::SystemModel<f64>;
pub type System32 = system::SystemModel<f32>;
pub type Profile = netmodel::VoltageProfile<f64>;
