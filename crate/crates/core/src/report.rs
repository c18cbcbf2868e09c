//! Verdicts, residual tables and the convergence-based tolerance rule.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One pass/fail verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Passes when `|value| <= tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value.abs() <= tolerance, note: None }
    }

    /// Passes when `value >= threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, tolerance: threshold, passed: value >= threshold, note: None }
    }

    /// Passes when `|value - target| <= window`.
    pub fn within(name: impl Into<String>, value: f64, target: f64, window: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance: window,
            passed: (value - target).abs() <= window,
            note: Some(format!("target {target}")),
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: if passed { 1.0 } else { 0.0 },
            tolerance: 1.0,
            passed,
            note: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// One measured residual, keyed for CSV export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub quantity: String,
    pub label: String,
    pub n: usize,
    pub value: f64,
}

impl ResidualRow {
    pub fn new(quantity: impl Into<String>, label: impl Into<String>, n: usize, value: f64) -> Self {
        Self { quantity: quantity.into(), label: label.into(), n, value }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    /// Conventions in force, e.g. skew convention and flux orientation.
    pub conventions: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    pub rows: Vec<ResidualRow>,
    pub passed: bool,
}

impl SuiteReport {
    pub fn new(suite: impl Into<String>, seed: u64) -> Self {
        Self { suite: suite.into(), seed, ..Self::default() }
    }

    pub fn convention(&mut self, key: &str, value: impl Into<String>) {
        self.conventions.insert(key.into(), value.into());
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn row(&mut self, row: ResidualRow) {
        self.rows.push(row);
    }

    /// Sets `passed` from the checks; a suite without checks fails.
    pub fn finish(mut self) -> Self {
        self.passed = !self.checks.is_empty() && self.checks.iter().all(|c| c.passed);
        self
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn write_checks_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["suite", "seed", "check", "value", "tolerance", "passed", "note"])?;
        for c in &self.checks {
            w.write_record([
                self.suite.as_str(),
                &self.seed.to_string(),
                &c.name,
                &format!("{:e}", c.value),
                &format!("{:e}", c.tolerance),
                if c.passed { "true" } else { "false" },
                c.note.as_deref().unwrap_or(""),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_rows_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["suite", "quantity", "label", "n", "value"])?;
        for r in &self.rows {
            w.write_record([self.suite.as_str(), &r.quantity, &r.label, &r.n.to_string(), &format!("{:e}", r.value)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `log2(e_coarse / e_fine) / log2(h_coarse / h_fine)`.
pub fn observed_order(e_coarse: f64, e_fine: f64, h_ratio: f64) -> f64 {
    (e_coarse / e_fine).ln() / h_ratio.ln()
}

/// Tolerance for a quantity expected to vanish like `C h^order`.
///
/// `C` is estimated from the coarse grid, `C = e_coarse / h_coarse^order`, and the
/// fine-grid value must not exceed `safety C h_fine^order + floor`. The floor
/// absorbs round-off once the discretisation error has reached it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Richardson {
    pub safety: f64,
    pub order: f64,
    pub floor: f64,
}

impl Default for Richardson {
    fn default() -> Self {
        Self { safety: 1.25, order: 2.0, floor: 1e-12 }
    }
}

impl Richardson {
    pub fn tolerance(&self, e_coarse: f64, h_coarse: f64, h_fine: f64) -> f64 {
        self.safety * e_coarse.abs() * (h_fine / h_coarse).powf(self.order) + self.floor
    }

    /// Builds the check `e_fine <= tolerance(e_coarse)` with `floor` scaled by `scale`.
    pub fn check(
        &self,
        name: impl Into<String>,
        e_coarse: f64,
        e_fine: f64,
        h_coarse: f64,
        h_fine: f64,
        scale: f64,
    ) -> Check {
        let tol = self.safety * e_coarse.abs() * (h_fine / h_coarse).powf(self.order) + self.floor * scale.max(1.0);
        Check::at_most(name, e_fine, tol).with_note(format!("coarse {e_coarse:e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_order_sequence_passes_first_order_fails() {
        let r = Richardson::default();
        assert!(r.check("q", 1e-2, 2.6e-3, 0.2, 0.1, 1.0).passed);
        assert!(!r.check("q", 1e-2, 5e-3, 0.2, 0.1, 1.0).passed);
        assert!(r.check("q", 1e-15, 3e-15, 0.2, 0.1, 1.0).passed);
        assert!((observed_order(4.0, 1.0, 2.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn suite_passes_only_with_all_checks() {
        let mut s = SuiteReport::new("x", 1);
        assert!(!s.clone().finish().passed);
        s.push(Check::at_most("a", 1e-13, 1e-12));
        s.push(Check::within("b", 2.05, 2.0, 0.2));
        assert!(s.clone().finish().passed);
        s.push(Check::at_least("c", 2.0, 3.0));
        let s = s.finish();
        assert!(!s.passed);
        assert_eq!(s.failures().count(), 1);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let mut s = SuiteReport::new("ops", 7);
        s.convention("skew", "skew_part");
        s.push(Check::at_most("a", -1e-13, 1e-12));
        s.row(ResidualRow::new("grad", "sin", 16, 1e-3));
        let s = s.finish();
        let json = serde_json::to_string(&s).unwrap();
        let back: SuiteReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let mut buf = Vec::new();
        s.write_checks_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
        let mut buf = Vec::new();
        s.write_rows_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("grad,sin,16"));
    }
}
