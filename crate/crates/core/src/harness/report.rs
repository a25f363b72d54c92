use super::config::{ExperimentConfig, Mode};
use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// Per-seed measurements, keyed by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub values: BTreeMap<String, f64>,
    pub runtime_ms: u64,
}

impl SeedRecord {
    pub fn new(seed: u64) -> Self {
        Self { seed, values: BTreeMap::new(), runtime_ms: 0 }
    }

    pub fn set(&mut self, key: &str, v: f64) {
        self.values.insert(key.to_string(), v);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    /// `"<="`, `">="` or `"=="`.
    pub op: String,
    pub threshold: f64,
    pub passed: bool,
}

impl Assertion {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, op: "<=".into(), threshold, passed: value <= threshold }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, op: ">=".into(), threshold, passed: value >= threshold }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Self { name: name.into(), value: v, op: "==".into(), threshold: 1.0, passed: ok }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub mode: Mode,
    pub version: String,
    pub config: ExperimentConfig,
    pub records: Vec<SeedRecord>,
    /// Median of every record field; always equal to [`aggregate`] of `records`.
    pub aggregates: BTreeMap<String, f64>,
    pub assertions: Vec<Assertion>,
    /// Non-fatal warnings.
    pub flags: Vec<String>,
    /// Build-time quantities that are not per seed.
    pub diagnostics: BTreeMap<String, serde_json::Value>,
    pub error: Option<String>,
    pub passed: bool,
    pub elapsed_ms: u64,
}

/// Median with non-finite values ordered last (`total_cmp`).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Medians of every field present in the records.
pub fn aggregate(records: &[SeedRecord]) -> BTreeMap<String, f64> {
    let keys: BTreeSet<&String> = records.iter().flat_map(|r| r.values.keys()).collect();
    keys.into_iter()
        .map(|k| {
            let vals: Vec<f64> = records.iter().filter_map(|r| r.values.get(k).copied()).collect();
            (k.clone(), median(&vals))
        })
        .collect()
}

impl ExperimentReport {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            mode: config.mode,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            records: Vec::new(),
            aggregates: BTreeMap::new(),
            assertions: Vec::new(),
            flags: Vec::new(),
            diagnostics: BTreeMap::new(),
            error: None,
            passed: false,
            elapsed_ms: 0,
        }
    }

    pub fn median(&self, key: &str) -> f64 {
        self.aggregates.get(key).copied().unwrap_or(f64::NAN)
    }

    pub fn diag(&mut self, key: &str, v: impl Serialize) {
        self.diagnostics.insert(key.into(), serde_json::to_value(v).unwrap_or(serde_json::Value::Null));
    }

    /// Recompute aggregates and the overall verdict.
    pub fn finish(&mut self) {
        self.aggregates = aggregate(&self.records);
        self.passed = self.error.is_none() && !self.assertions.is_empty() && self.assertions.iter().all(|a| a.passed);
    }

    /// Copy with every wall-clock field zeroed.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.elapsed_ms = 0;
        for rec in r.records.iter_mut() {
            rec.runtime_ms = 0;
        }
        r.diagnostics.retain(|k, _| !k.ends_with("_ms"));
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per seed; columns are `seed`, the union of record fields in
    /// sorted order, then `runtime_ms`. Missing values are left empty.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let keys: BTreeSet<&String> = self.records.iter().flat_map(|r| r.values.keys()).collect();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["seed".to_string()];
        header.extend(keys.iter().map(|k| k.to_string()));
        header.push("runtime_ms".into());
        out.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.seed.to_string()];
            row.extend(keys.iter().map(|k| r.values.get(*k).map(|v| v.to_string()).unwrap_or_default()));
            row.push(r.runtime_ms.to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `report.json` and `report.csv` into `dir`, creating it.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        self.write_csv(std::fs::File::create(dir.join("report.csv"))?)?;
        Ok(())
    }
}
