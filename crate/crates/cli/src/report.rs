use crate::config::ExperimentConfig;
use anyhow::Result;
use avoidwalk_core::walk_core::RNG_NAME;
use serde::Serialize;
use std::path::Path;

/// Where a number comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    /// Exact recursion or linear solve.
    #[serde(rename = "oracle")]
    Oracle,
    /// Monte Carlo with a step cap.
    #[serde(rename = "mc-capped")]
    McCapped,
    /// Monte Carlo survival fraction at a horizon.
    #[serde(rename = "mc-tail")]
    McTail,
    /// Other Monte Carlo statistics.
    #[serde(rename = "mc")]
    Mc,
}

#[derive(Clone, Debug, Serialize)]
pub struct Value {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub tag: Provenance,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Known-unattainable checks are reported but do not fail the run.
    pub asserted: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

/// Shorthand for table cells.
#[macro_export]
macro_rules! row {
    ($($v:expr),* $(,)?) => { vec![$(format!("{}", $v)),*] };
}

/// Values, checks, tables and free-form details collected by an experiment.
#[derive(Debug, Default)]
pub struct Findings {
    pub values: Vec<Value>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub details: serde_json::Map<String, serde_json::Value>,
}

impl Findings {
    pub fn value(&mut self, name: impl Into<String>, value: f64, tag: Provenance) {
        self.values.push(Value { name: name.into(), value, stderr: None, tag });
    }

    pub fn estimate(&mut self, name: impl Into<String>, value: f64, stderr: f64, tag: Provenance) {
        self.values.push(Value { name: name.into(), value, stderr: Some(stderr), tag });
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, asserted: true, detail: detail.into() });
    }

    /// A check that is reported but known to be out of reach at this scale.
    pub fn reported(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, asserted: false, detail: detail.into() });
    }

    pub fn detail<T: Serialize>(&mut self, key: &str, v: &T) -> Result<()> {
        self.details.insert(key.into(), serde_json::to_value(v)?);
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub rng: &'static str,
    pub experiment: &'static str,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    pub status: &'static str,
    pub values: Vec<Value>,
    pub checks: Vec<Check>,
    pub details: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn new(cfg: &ExperimentConfig, f: Findings) -> Result<Self> {
        let passed = f.checks.iter().all(|c| c.passed || !c.asserted);
        let report = Report {
            tool: "avoidwalk",
            version: env!("CARGO_PKG_VERSION"),
            rng: RNG_NAME,
            experiment: cfg.experiment.name(),
            config: serde_json::to_value(cfg)?,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            status: if passed { "pass" } else { "fail" },
            values: f.values,
            checks: f.checks,
            details: f.details,
        };
        Ok(Self { report, tables: f.tables })
    }

    pub fn passed(&self) -> bool {
        self.report.status == "pass"
    }

    pub fn report_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.report)? + "\n")
    }

    /// Writes `<experiment>.json` and one CSV per table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let json = dir.join(format!("{}.json", self.report.experiment));
        std::fs::write(&json, self.report_json()?)?;
        written.push(json);
        for t in &self.tables {
            let p = dir.join(format!("{}_{}.csv", self.report.experiment, t.name));
            std::fs::write(&p, t.to_csv()?)?;
            written.push(p);
        }
        Ok(written)
    }
}
