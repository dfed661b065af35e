//! Metric report rendering: JSON and an aligned plain-text table with the
//! columns Rel, SqRel, RMSE, Log RMSE, A1, A2, A3.

use serde::{Deserialize, Serialize};

use ssa2_core::metrics::MetricReport;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NamedReport {
    pub name: String,
    pub absrel: f64,
    pub sqrel: f64,
    pub rmse: f64,
    pub logrmse: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub valid_pixel_count: usize,
}

impl NamedReport {
    pub fn new(name: impl Into<String>, r: &MetricReport) -> Self {
        Self {
            name: name.into(),
            absrel: r.absrel,
            sqrel: r.sqrel,
            rmse: r.rmse,
            logrmse: r.logrmse,
            delta1: r.delta1,
            delta2: r.delta2,
            delta3: r.delta3,
            valid_pixel_count: r.valid_pixel_count,
        }
    }

    pub fn to_metric_report(&self) -> MetricReport {
        MetricReport {
            absrel: self.absrel,
            sqrel: self.sqrel,
            rmse: self.rmse,
            logrmse: self.logrmse,
            delta1: self.delta1,
            delta2: self.delta2,
            delta3: self.delta3,
            valid_pixel_count: self.valid_pixel_count,
        }
    }
}

pub fn to_json(reports: &[NamedReport]) -> crate::Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

const COLUMNS: [&str; 7] = ["Rel", "SqRel", "RMSE", "Log RMSE", "A1", "A2", "A3"];

/// Right-aligned fixed-width table, four decimals per value.
pub fn to_table(reports: &[NamedReport]) -> String {
    let name_width = reports
        .iter()
        .map(|r| r.name.len())
        .chain(["Scene".len()].into_iter())
        .max()
        .unwrap_or(5);
    let col_width = COLUMNS.iter().map(|c| c.len()).max().unwrap().max(8);
    let mut out = String::new();
    out.push_str(&format!("{:<name_width$}", "Scene"));
    for c in COLUMNS {
        out.push_str(&format!("  {c:>col_width$}"));
    }
    out.push('\n');
    for r in reports {
        out.push_str(&format!("{:<name_width$}", r.name));
        for v in [
            r.absrel, r.sqrel, r.rmse, r.logrmse, r.delta1, r.delta2, r.delta3,
        ] {
            out.push_str(&format!("  {v:>col_width$.4}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> NamedReport {
        NamedReport {
            name: "scene0000".into(),
            absrel: 0.3,
            sqrel: 0.18,
            rmse: 0.6,
            logrmse: 0.262364,
            delta1: 0.0,
            delta2: 1.0,
            delta3: 1.0,
            valid_pixel_count: 100,
        }
    }

    #[test]
    fn table_has_header_and_aligned_rows() {
        let t = to_table(&[sample()]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("Rel"));
        assert!(lines[0].contains("Log RMSE"));
        assert!(lines[1].contains("0.3000"));
        assert_eq!(lines[0].len(), lines[1].len());
        // column order fixed: Rel before SqRel before RMSE
        let rel = lines[0].find("Rel").unwrap();
        let sqrel = lines[0].find("SqRel").unwrap();
        assert!(rel < sqrel);
    }

    #[test]
    fn json_round_trip() {
        let reports = vec![sample()];
        let text = to_json(&reports).unwrap();
        let back: Vec<NamedReport> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, reports);
    }
}
