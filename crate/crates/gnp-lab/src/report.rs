//! Experiment reports: per-replica values with summary statistics, pass/fail
//! checks against configurable bands, and deterministic JSON/CSV emission.
//!
//! Reports deliberately echo everything needed to re-run them exactly (kind,
//! sizes, seed, replica count) but not the worker count: by contract the
//! numbers are identical at any parallelism level, and the serialized bytes
//! must be too.

use serde::{Deserialize, Serialize};

use crate::stats::RatioStats;

/// A check applied to one series of per-replica values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesCheck {
    /// Mean within [lo, hi].
    MeanIn { lo: f64, hi: f64 },
    /// Median within [lo, hi].
    MedianIn { lo: f64, hi: f64 },
    /// Coefficient of variation below the bound.
    CvBelow { hi: f64 },
    /// Coefficient of variation above the bound.
    CvAbove { lo: f64 },
    /// 95%/5% quantile ratio above the bound.
    QuantileRatioAbove { lo: f64 },
}

impl SeriesCheck {
    pub fn evaluate(&self, stats: &RatioStats) -> bool {
        match *self {
            SeriesCheck::MeanIn { lo, hi } => stats.mean >= lo && stats.mean <= hi,
            SeriesCheck::MedianIn { lo, hi } => stats.median >= lo && stats.median <= hi,
            SeriesCheck::CvBelow { hi } => stats.cv < hi,
            SeriesCheck::CvAbove { lo } => stats.cv > lo,
            SeriesCheck::QuantileRatioAbove { lo } => stats.q95 / stats.q05 > lo,
        }
    }
}

/// One named metric with its per-replica values (ordered by replica index).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub per_replica: Vec<f64>,
    pub stats: RatioStats,
    /// The limit value the normalized metric converges to, where one exists.
    pub target: Option<f64>,
    pub checks: Vec<SeriesCheck>,
    pub pass: bool,
}

impl Series {
    pub fn new(
        name: &str,
        per_replica: Vec<f64>,
        target: Option<f64>,
        checks: Vec<SeriesCheck>,
    ) -> Self {
        let stats = RatioStats::from_values(&per_replica);
        let pass = checks.iter().all(|c| c.evaluate(&stats));
        Self {
            name: name.to_string(),
            per_replica,
            stats,
            target,
            checks,
            pass,
        }
    }
}

/// Report of a ratio experiment (subcritical / supercritical / window).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport<C> {
    pub config: C,
    pub version: String,
    pub warnings: Vec<String>,
    pub series: Vec<Series>,
    pub pass: bool,
}

impl<C: Serialize> ExperimentReport<C> {
    pub fn new(config: C, warnings: Vec<String>, series: Vec<Series>) -> Self {
        let pass = series.iter().all(|s| s.pass);
        Self {
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            warnings,
            series,
            pass,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// CSV with one row per replica; config and stats ride along as
    /// comment lines so the file stands alone.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# version {}\n", self.version));
        out.push_str(&format!(
            "# config {}\n",
            serde_json::to_string(&self.config).expect("config serializes")
        ));
        for w in &self.warnings {
            out.push_str(&format!("# warning {w}\n"));
        }
        for s in &self.series {
            let target = s
                .target
                .map_or_else(|| "none".to_string(), |t| format_f64(t));
            out.push_str(&format!(
                "# series {} target {} pass {}\n",
                s.name, target, s.pass
            ));
        }
        out.push_str("replica");
        for s in &self.series {
            out.push(',');
            out.push_str(&s.name);
        }
        out.push('\n');
        let rows = self.series.first().map_or(0, |s| s.per_replica.len());
        for i in 0..rows {
            out.push_str(&i.to_string());
            for s in &self.series {
                out.push(',');
                out.push_str(&format_f64(s.per_replica[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip decimal form, identical to serde_json's float output.
pub fn format_f64(v: f64) -> String {
    let mut buf = ryu_format(v);
    if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("NaN") {
        buf.push_str(".0");
    }
    buf
}

fn ryu_format(v: f64) -> String {
    // serde_json prints f64 via ryu; Display for f64 in Rust produces the
    // same shortest round-trip digits, so plain formatting keeps CSV and
    // JSON byte-compatible.
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_evaluate() {
        let stats = RatioStats::from_values(&[0.9, 1.0, 1.1]);
        assert!(SeriesCheck::MeanIn { lo: 0.85, hi: 1.05 }.evaluate(&stats));
        assert!(!SeriesCheck::MeanIn { lo: 1.05, hi: 1.2 }.evaluate(&stats));
        assert!(SeriesCheck::CvBelow { hi: 0.2 }.evaluate(&stats));
        assert!(!SeriesCheck::CvAbove { lo: 0.2 }.evaluate(&stats));
    }

    #[test]
    fn csv_and_json_carry_identical_values() {
        let series = Series::new("ratio", vec![0.5, 1.25, 2.0], Some(1.0), vec![]);
        let report = ExperimentReport::new(serde_json::json!({"n": 10}), vec![], vec![series]);
        let json = report.to_json();
        let csv = report.to_csv();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        let json_vals: Vec<f64> = parsed["series"][0]["per_replica"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        let csv_vals: Vec<f64> = csv
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("replica"))
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert_eq!(json_vals, csv_vals);
        assert_eq!(json_vals, vec![0.5, 1.25, 2.0]);
    }
}
