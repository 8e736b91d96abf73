//! Fixed-layout numeric tables for the report types.
//!
//! Floats are rendered with 17 significant digits (`{:.16e}`), which round
//! trips every `f64`.

use crate::ergodicity::ErgodicityReport;
use crate::ldt::LdtReport;
use crate::lyapunov::{L1Estimate, SemicontinuityScan};
use crate::schrodinger::EnergyRow;

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Comma-separated rendering with a header line and `\n` line endings.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// One row per mode: `k_1, …, k_d, re, im, gap` with `gap = |μ̂(k) − 1|`.
pub fn ergodicity_table(report: &ErgodicityReport) -> Table {
    let d = report.gaps.first().map_or(1, |g| g.mode.len());
    let mut header: Vec<String> = (1..=d).map(|i| format!("k{i}")).collect();
    header.extend(["re", "im", "gap"].map(String::from));
    let mut t = Table::new(header);
    for g in &report.gaps {
        let mut row: Vec<String> = g.mode.iter().map(|k| k.to_string()).collect();
        row.extend([fmt_float(g.coefficient.re), fmt_float(g.coefficient.im), fmt_float(g.gap)]);
        t.push(row);
    }
    t
}

pub fn ldt_table(report: &LdtReport) -> Table {
    let mut t = Table::new(["n", "samples", "exceedances", "tail", "stderr"]);
    for r in &report.rows {
        t.push(vec![
            r.n.to_string(),
            r.samples.to_string(),
            r.exceedances.to_string(),
            fmt_float(r.tail),
            fmt_float(r.stderr),
        ]);
    }
    t
}

pub fn l1_table<'a>(estimates: impl IntoIterator<Item = &'a L1Estimate>) -> Table {
    let mut t = Table::new(["n", "samples", "estimate", "stderr"]);
    for e in estimates {
        t.push(vec![e.n.to_string(), e.samples.to_string(), fmt_float(e.mean), fmt_float(e.stderr)]);
    }
    t
}

/// The reference row has index `-1` and distance 0.
pub fn scan_table(scan: &SemicontinuityScan) -> Table {
    let mut t = Table::new(["index", "w1", "l1", "stderr"]);
    t.push(vec!["-1".into(), fmt_float(0.0), fmt_float(scan.reference.mean), fmt_float(scan.reference.stderr)]);
    for r in &scan.rows {
        t.push(vec![r.index.to_string(), fmt_float(r.w1), fmt_float(r.estimate.mean), fmt_float(r.estimate.stderr)]);
    }
    t
}

pub fn energy_table(rows: &[EnergyRow]) -> Table {
    let mut t = Table::new(["energy", "l1", "stderr"]);
    for r in rows {
        t.push(vec![fmt_float(r.energy), fmt_float(r.estimate.mean), fmt_float(r.estimate.stderr)]);
    }
    t
}
