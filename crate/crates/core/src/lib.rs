//! Next-day traffic forecasting and load balancing for hexagonal cells split
//! into triangular microcells.
//!
//! * [`hexgrid`]: cell geometry, adjacency and border (scope) sets.
//! * [`trafficgen`]: synthetic traffic and priority series.
//! * [`ctp`]: LSTM forecaster, priority softmax and traffic scores.
//! * [`pct`]: border-microcell exchange between adjacent cells.
//! * [`metrics`]: load variance and load factor.
//! * [`pipeline`]: file-based stages tying the above together.

pub mod ctp;
pub mod error;
pub mod hexgrid;
pub mod io;
pub mod metrics;
pub mod pct;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod svg;
pub mod trafficgen;

pub use error::{Error, Result};
