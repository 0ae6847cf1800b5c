//! Experiment reports: named metrics and curves plus an echo of the
//! resolved configuration, serialized as JSON.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_echo: RunConfig,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub curves: BTreeMap<String, Vec<(f64, f64)>>,
}

impl ExperimentReport {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            config_echo: cfg.clone(),
            seed: cfg.seed,
            metrics: BTreeMap::new(),
            curves: BTreeMap::new(),
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn curve(&mut self, name: impl Into<String>, points: Vec<(f64, f64)>) {
        self.curves.insert(name.into(), points);
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with wall-clock metrics and curves stripped; two runs with the
    /// same config and seed must produce byte-identical output here.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.metrics.retain(|k, _| !k.contains("wall_time"));
        copy.curves.retain(|k, _| !k.contains("wall_time"));
        Ok(serde_json::to_string_pretty(&copy)?)
    }

    pub fn write_json(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json_pretty()? + "\n")?;
        Ok(())
    }

    /// Write each curve as a two-column CSV next to the report path:
    /// `<stem>.<curve>.csv` with an `x,y` header.
    pub fn write_curves_csv(&self, report_path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = report_path.as_ref();
        let stem = path.with_extension("");
        for (name, points) in &self.curves {
            let mut body = String::from("x,y\n");
            for (x, y) in points {
                body.push_str(&format!("{x},{y}\n"));
            }
            std::fs::write(format!("{}.{name}.csv", stem.display()), body)?;
        }
        Ok(())
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    variance(values).sqrt()
}

/// Compact float rendering for metric key suffixes ("6", "7.5").
pub fn fmt_num(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v}")
    }
}
