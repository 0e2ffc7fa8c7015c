//! Factor research on constant-product AMM token cross-sections.
//!
//! The pipeline runs snapshot rows → [`panel::ReturnPanel`] → lagged
//! [`characteristics`] → tercile [`factors`] → [`econometrics`] and the
//! applied [`experiments`]. [`synth`] generates snapshot rows from simulated
//! pools so the whole chain can be exercised without external data.

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the date/subnet grid
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod amm;
pub mod characteristics;
pub mod cli;
pub mod econometrics;
pub mod error;
pub mod experiments;
pub mod factors;
pub mod grid;
pub mod ingest;
pub mod moments;
pub mod panel;
pub mod plot;
pub mod synth;

pub use error::{Error, Result};
