//! Balance report file and the plain-text metrics table.

use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io;
use crate::metrics::{reference, Comparison};
use crate::pct::BalanceResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub hex: usize,
    pub local: usize,
    pub from: usize,
    pub to: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub avg_score: f64,
    pub totals_before: Vec<f64>,
    pub totals_after: Vec<f64>,
    pub transfers: Vec<TransferRecord>,
    pub iterations: usize,
    /// Absent for single-hexagon layouts.
    pub metrics: Option<Comparison>,
}

impl BalanceReport {
    pub fn from_result(r: &BalanceResult) -> Result<Self> {
        let metrics = if r.hex_traffic_before.len() >= 2 {
            Some(Comparison::new(&r.hex_traffic_before, &r.hex_traffic_after)?)
        } else {
            None
        };
        Ok(Self {
            avg_score: r.avg_score,
            totals_before: r.hex_traffic_before.clone(),
            totals_after: r.hex_traffic_after.clone(),
            transfers: r
                .added
                .iter()
                .map(|t| TransferRecord {
                    hex: t.triangle.hex,
                    local: t.triangle.local,
                    from: t.from,
                    to: t.to,
                    score: t.score,
                })
                .collect(),
            iterations: r.iterations,
            metrics,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }
}

/// Before/after totals for the `report` stage. Accepts either
/// `{before, after}` or a balance report's `{totals_before, totals_after}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalsPair {
    #[serde(alias = "totals_before")]
    pub before: Vec<f64>,
    #[serde(alias = "totals_after")]
    pub after: Vec<f64>,
}

const HEADER: &str = "layout      N   lvc_before    lvc_after  decrease_%  par_before  par_after  lf_before  lf_after";

fn row(out: &mut String, name: &str, n: usize, c: &Comparison) {
    let dec = c
        .percent_decrease_lvc
        .map_or_else(|| "-".to_owned(), |d| format!("{d:.3}"));
    let _ = writeln!(
        out,
        "{name:<10} {n:>2} {:>12.3} {:>12.3} {dec:>11} {:>11.4} {:>10.4} {:>10.4} {:>9.4}",
        c.before.lvc, c.after.lvc, c.before.par, c.after.par, c.before.lf, c.after.lf
    );
}

pub fn format_table(entries: &[(&str, &TotalsPair)]) -> Result<String> {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for (name, pair) in entries {
        let c = Comparison::new(&pair.before, &pair.after)?;
        row(&mut out, name, pair.before.len(), &c);
    }
    Ok(out)
}

/// Metrics of the two worked reference layouts, with the label note.
pub fn reference_table() -> String {
    let three = TotalsPair {
        before: reference::THREE_CELL_BEFORE.to_vec(),
        after: reference::THREE_CELL_AFTER.to_vec(),
    };
    let seven = TotalsPair {
        before: reference::SEVEN_CELL_BEFORE.to_vec(),
        after: reference::SEVEN_CELL_AFTER.to_vec(),
    };
    let mut out = format_table(&[("wnl1", &three), ("wnl2", &seven)]).expect("reference totals are valid");
    out.push_str(reference::LABEL_NOTE);
    out.push('\n');
    out
}
