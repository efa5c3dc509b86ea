use std::io::Write;

use hwy_core::experiments::SweepRow;
use serde::Serialize;

use crate::config::LabConfig;
use crate::error::LabResult;

/// One measured quantity with its pass criterion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// How `value` is compared: `le` (value ≤ tolerance), `ge`
    /// (value ≥ tolerance) or `abs_err` (|value − target| ≤ tolerance).
    pub compare: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
            compare: "le",
            target: None,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance: bound,
            pass: value >= bound,
            compare: "ge",
            target: None,
        }
    }

    pub fn near(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            pass: (value - target).abs() <= tolerance,
            compare: "abs_err",
            target: Some(target),
        }
    }

    /// A check that could not be evaluated.
    pub fn failed(name: impl Into<String>, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value: f64::NAN,
            tolerance,
            pass: false,
            compare: "le",
            target: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub suite: String,
    pub config: LabConfig,
    pub tests: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Command-specific results.
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub data: serde_json::Value,
}

impl Report {
    pub fn new(suite: impl Into<String>, config: &LabConfig) -> Self {
        Report {
            suite: suite.into(),
            config: config.clone(),
            tests: Vec::new(),
            notes: Vec::new(),
            data: serde_json::Value::Null,
        }
    }

    pub fn passed(&self) -> bool {
        self.tests.iter().all(|c| c.pass)
    }

    pub fn write_json<W: Write>(&self, w: W) -> LabResult<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// Columns `name,value,tolerance,pass`.
    pub fn write_csv<W: Write>(&self, w: W) -> LabResult<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["name", "value", "tolerance", "pass"])?;
        for c in &self.tests {
            out.write_record([
                c.name.clone(),
                format!("{:e}", c.value),
                format!("{:e}", c.tolerance),
                c.pass.to_string(),
            ])?;
        }
        out.flush().map_err(|e| crate::error::LabError::io("<csv>", e))?;
        Ok(())
    }
}

#[derive(Serialize)]
struct RowRecord {
    parameter: f64,
    deficit: f64,
    distance_p: f64,
    distance_2: f64,
    quotient: f64,
}

/// Sweep rows as CSV with a header line.
pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> LabResult<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(RowRecord {
            parameter: r.parameter,
            deficit: r.deficit,
            distance_p: r.distance_p,
            distance_2: r.distance_2,
            quotient: r.quotient,
        })?;
    }
    out.flush().map_err(|e| crate::error::LabError::io("<csv>", e))?;
    Ok(())
}

pub fn read_sweep_csv<R: std::io::Read>(r: R) -> LabResult<Vec<SweepRow>> {
    #[derive(serde::Deserialize)]
    struct Rec {
        parameter: f64,
        deficit: f64,
        distance_p: f64,
        distance_2: f64,
        quotient: f64,
    }
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize::<Rec>()
        .map(|rec| {
            let r = rec?;
            Ok(SweepRow {
                parameter: r.parameter,
                deficit: r.deficit,
                distance_p: r.distance_p,
                distance_2: r.distance_2,
                quotient: r.quotient,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_kinds() {
        assert!(Check::at_most("a", 1.0, 1.0).pass);
        assert!(!Check::at_most("a", f64::NAN, 1.0).pass);
        assert!(Check::at_least("b", 0.1, 0.0).pass);
        assert!(!Check::near("c", 1.2, 1.0, 0.1).pass);
        assert!(!Check::failed("d", 1.0).pass);
    }

    #[test]
    fn json_shape() {
        let mut r = Report::new("spectral", &LabConfig::default());
        r.tests.push(Check::near("x", 0.5, 0.5, 1e-6));
        let mut buf = Vec::new();
        r.write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["suite"], "spectral");
        assert_eq!(v["config"]["sphere_res"]["polar"], 64);
        assert_eq!(v["tests"][0]["pass"], true);
        assert_eq!(v["tests"][0]["tolerance"], 1e-6);
    }

    #[test]
    fn sweep_roundtrip() {
        let rows = vec![SweepRow {
            parameter: 0.1,
            deficit: 1e-4,
            distance_p: 2e-5,
            distance_2: 3e-7,
            quotient: 4.9,
        }];
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("parameter,deficit,distance_p,distance_2,quotient\n"));
        assert_eq!(read_sweep_csv(&buf[..]).unwrap(), rows);
    }
}
