//! Load-distribution quality of per-hexagon totals.
//!
//! * `lvc`: sample variance of the totals (`N - 1` denominator).
//! * `lf`: average over peak, in `(0, 1]`.
//! * `par`: peak over average, the reciprocal of `lf`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt9, Table};

pub fn lvc(totals: &[f64]) -> Result<f64> {
    if totals.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "load variance needs at least 2 hexagons, got {}",
            totals.len()
        )));
    }
    let n = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / n;
    Ok(totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadFactor {
    pub lf: f64,
    pub par: f64,
    pub avg: f64,
    pub peak: f64,
}

pub fn load_factor(totals: &[f64]) -> Result<LoadFactor> {
    if totals.is_empty() {
        return Err(Error::InvalidInput("load factor of zero hexagons".into()));
    }
    let peak = totals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak.is_nan() || peak <= 0.0 {
        return Err(Error::InvalidInput("load factor needs a positive peak total".into()));
    }
    let avg = totals.iter().sum::<f64>() / totals.len() as f64;
    Ok(LoadFactor {
        lf: avg / peak,
        par: peak / avg,
        avg,
        peak,
    })
}

pub fn percent_decrease(before: f64, after: f64) -> Result<f64> {
    if before.is_nan() || before <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "percent decrease needs a positive baseline, got {before}"
        )));
    }
    Ok(100.0 * (before - after) / before)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub lvc: f64,
    pub lf: f64,
    pub par: f64,
    pub avg: f64,
    pub peak: f64,
}

impl MetricReport {
    pub fn from_totals(totals: &[f64]) -> Result<Self> {
        let load = load_factor(totals)?;
        Ok(Self {
            lvc: lvc(totals)?,
            lf: load.lf,
            par: load.par,
            avg: load.avg,
            peak: load.peak,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub before: MetricReport,
    pub after: MetricReport,
    pub percent_decrease_lvc: Option<f64>,
}

impl Comparison {
    pub fn new(before: &[f64], after: &[f64]) -> Result<Self> {
        let before = MetricReport::from_totals(before)?;
        let after = MetricReport::from_totals(after)?;
        let percent_decrease_lvc = if before.lvc > 0.0 {
            Some(percent_decrease(before.lvc, after.lvc)?)
        } else {
            None
        };
        Ok(Self {
            before,
            after,
            percent_decrease_lvc,
        })
    }
}

/// `iteration,lvc,lf,par` rows for a sequence of per-hexagon totals.
pub fn trace_table(trace: &[Vec<f64>]) -> Result<Table> {
    let mut t = Table::new(["iteration", "lvc", "lf", "par"]);
    for (i, totals) in trace.iter().enumerate() {
        let m = MetricReport::from_totals(totals)?;
        t.push(vec![i.to_string(), fmt9(m.lvc), fmt9(m.lf), fmt9(m.par)]);
    }
    Ok(t)
}

/// Per-hexagon totals of the two worked layouts, before and after balancing.
pub mod reference {
    /// Three-cell layout.
    pub const THREE_CELL_BEFORE: [f64; 3] = [1529.24, 1356.02, 1661.87];
    pub const THREE_CELL_AFTER: [f64; 3] = [1529.24, 1502.008, 1515.8195];
    /// Seven-cell layout.
    pub const SEVEN_CELL_BEFORE: [f64; 7] = [
        1571.1097, 1266.1715, 1199.427, 1003.5461, 1438.0893, 1316.9314, 1309.004,
    ];
    pub const SEVEN_CELL_AFTER: [f64; 7] = [
        1301.5125, 1266.1715, 1294.6283, 1288.0092, 1342.8885, 1302.0655, 1309.0043,
    ];

    /// Printed alongside any report of these totals.
    pub const LABEL_NOTE: &str = "note: the quoted LVC/LF figures labelled WNL1 \
        (32013 -> 540.2, LF 1.2 -> 1.03) are reproduced by the 7-cell (WNL2) totals, and those \
        labelled WNL2 (23524.6 -> 185.5, LF 1.1 -> 1.008) by the 3-cell (WNL1) totals; the quoted \
        LF values match peak/average (par), the reciprocal of average/peak (lf)";
}
