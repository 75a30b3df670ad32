//! Case files, experiment drivers and the `passivity` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod case;
pub mod cli;
pub mod experiments;
pub mod output;

pub use case::{load_case, CaseError, CaseFile};
pub use experiments::{HarnessError, Study};
