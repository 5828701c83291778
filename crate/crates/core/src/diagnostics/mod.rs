//! Measured instances of the energy, smoothing and interpolation inequalities.

mod garding;
mod interpolation;
mod kstar;
mod smoothing;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use garding::{garding_commutator_probe, CommutatorSample};
pub use interpolation::{interpolation_check, interpolation_ratio};
pub use kstar::{er_cache_path, kstar_energy_track, load_er_operator, KstarTrack};
pub use smoothing::{smoothing_estimate_check, smoothing_estimate_from_records, smoothing_functional, SmoothingRhs};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Bounded,
    Violated { ratio: f64 },
}

impl Verdict {
    pub fn is_bounded(&self) -> bool {
        matches!(self, Verdict::Bounded)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Bounded => "bounded",
            Verdict::Violated { .. } => "violated",
        }
    }
}

/// One measured inequality lhs ≤ C·rhs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub parameters: BTreeMap<String, f64>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub fn new(name: &str, lhs: f64, rhs: f64, bounded: bool) -> Self {
        let ratio = ratio_of(lhs, rhs);
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            ratio,
            parameters: BTreeMap::new(),
            verdict: if bounded { Verdict::Bounded } else { Verdict::Violated { ratio } },
            notes: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    fn param_cell(&self, key: &str) -> String {
        self.parameters.get(key).map_or(String::new(), |v| format!("{v}"))
    }
}

/// lhs/rhs, with 0/0 = 0 and x/0 = ∞.
pub(crate) fn ratio_of(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub const SWEEP_CSV_HEADER: &str = "estimate,epsilon,R,M,lhs,rhs,ratio,verdict";

/// Sweep table with columns estimate, ε, R, M, lhs, rhs, ratio, verdict; ε, R and M come from the
/// `epsilon`, `radius` and `grid_points` parameters and are blank when absent.
pub fn write_sweep_csv(reports: &[EstimateReport], w: &mut impl Write) -> Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{:e},{:e},{:e},{}",
            r.name,
            r.param_cell("epsilon"),
            r.param_cell("radius"),
            r.param_cell("grid_points"),
            r.lhs,
            r.rhs,
            r.ratio,
            r.verdict.label()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_conventions() {
        assert_eq!(ratio_of(0.0, 0.0), 0.0);
        assert_eq!(ratio_of(1.0, 0.0), f64::INFINITY);
        assert_eq!(EstimateReport::new("x", 3.0, 2.0, true).ratio, 1.5);
        let v = EstimateReport::new("x", 3.0, 1.0, false);
        assert_eq!(v.verdict, Verdict::Violated { ratio: 3.0 });
    }

    #[test]
    fn sweep_csv_columns() {
        let reports = vec![
            EstimateReport::new("smoothing", 1.0, 2.0, true).with("epsilon", 0.01).with("grid_points", 128.0),
            EstimateReport::new("garding", 2.0, 1.0, false),
        ];
        let mut buf = Vec::new();
        write_sweep_csv(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert!(lines[1].starts_with("smoothing,0.01,,128,"));
        assert!(lines[2].ends_with(",violated"));
        assert!(lines.iter().all(|l| l.split(',').count() == 8));
    }

    #[test]
    fn report_json_round_trip() {
        let r = EstimateReport::new("interp", 0.5, 1.0, true).with("samples", 10.0);
        let back: EstimateReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
