//! Result records and their three renderings.

use std::fmt::Write as _;

use serde::Serialize;

use crate::config::Format;
use crate::CliError;

pub const SCHEMA: &str = "kronrate.result/1";

#[derive(Clone, Debug, Default, Serialize)]
pub struct Row {
    /// What was computed or checked, e.g. `kappa` or `window`.
    pub item: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterfunction: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    /// `None` for informational rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability: Option<Probability>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Probability {
    Exact { value: String },
    Estimate { frequency: String, margin: String, trials: u64, seed: u64, confidence: String },
}

impl Probability {
    fn short(&self) -> String {
        match self {
            Probability::Exact { value } => value.clone(),
            Probability::Estimate { frequency, margin, .. } => format!("{frequency} +- {margin}"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub checks: u64,
    pub passed: u64,
    pub failed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResultRecord {
    pub schema: &'static str,
    pub command: String,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub rows: Vec<Row>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

impl ResultRecord {
    pub fn new(command: &str, config_hash: String, description: Option<String>, rows: Vec<Row>) -> Self {
        let checks = rows.iter().filter(|r| r.passed.is_some()).count() as u64;
        let passed = rows.iter().filter(|r| r.passed == Some(true)).count() as u64;
        ResultRecord {
            schema: SCHEMA,
            command: command.into(),
            config_hash,
            description,
            rows,
            summary: Summary { checks, passed, failed: checks - passed },
            timestamp: None,
            wall_time_ms: None,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(e.to_string()))?;
                s.push('\n');
                Ok(s)
            }
            Format::Csv => self.csv(),
            Format::Table => Ok(self.table()),
        }
    }

    fn csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Runtime(e.to_string());
        w.write_record(["schema", "command", "config_hash", "item", "eps", "lambda", "counterfunction", "value", "passed", "probability", "margin", "detail"])
            .map_err(io)?;
        for r in &self.rows {
            let (p, m) = match &r.probability {
                Some(Probability::Exact { value }) => (value.clone(), String::new()),
                Some(Probability::Estimate { frequency, margin, .. }) => (frequency.clone(), margin.clone()),
                None => (String::new(), String::new()),
            };
            let o = |x: &Option<String>| x.clone().unwrap_or_default();
            w.write_record([
                self.schema.to_string(),
                self.command.clone(),
                self.config_hash.clone(),
                r.item.clone(),
                o(&r.eps),
                o(&r.lambda),
                o(&r.counterfunction),
                o(&r.value),
                r.passed.map(|b| b.to_string()).unwrap_or_default(),
                p,
                m,
                o(&r.detail),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Runtime(e.to_string()))
    }

    fn table(&self) -> String {
        let header = ["item", "eps", "lambda", "g/K", "value", "verdict", "probability", "detail"];
        let cells: Vec<[String; 8]> = self
            .rows
            .iter()
            .map(|r| {
                let o = |x: &Option<String>| x.clone().unwrap_or_else(|| "-".into());
                [
                    r.item.clone(),
                    o(&r.eps),
                    o(&r.lambda),
                    o(&r.counterfunction),
                    o(&r.value),
                    match r.passed {
                        Some(true) => "pass".into(),
                        Some(false) => "FAIL".into(),
                        None => "-".into(),
                    },
                    r.probability.as_ref().map_or_else(|| "-".into(), Probability::short),
                    r.detail.clone().unwrap_or_default(),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "# {} ({})  config {}", self.command, self.schema, self.config_hash);
        if let Some(d) = &self.description {
            let _ = writeln!(out, "# {d}");
        }
        let line = |out: &mut String, row: &[String]| {
            let mut s = String::new();
            for (c, w) in row.iter().zip(widths) {
                let _ = write!(s, "{c:<w$}  ");
            }
            let _ = writeln!(out, "{}", s.trim_end());
        };
        line(&mut out, &header.map(String::from));
        for row in &cells {
            line(&mut out, row);
        }
        let s = &self.summary;
        let _ = writeln!(out, "# {} checks, {} passed, {} failed", s.checks, s.passed, s.failed);
        if let Some(t) = self.timestamp {
            let _ = writeln!(out, "# timestamp {t}");
        }
        if let Some(ms) = self.wall_time_ms {
            let _ = writeln!(out, "# wall time {ms} ms");
        }
        out
    }
}
