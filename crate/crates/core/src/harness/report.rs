use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::run::{ComparisonRow, Detector};
use super::scenario::ScenarioError;
use crate::analytics::FleetReport;
use crate::time::format_duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Table,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

const COLUMNS: [&str; 6] = ["position", "tracker", "kind", "engine", "time_to_notification", "locations"];

fn cells(row: &ComparisonRow) -> [String; 6] {
    [
        row.position.clone(),
        row.tracker.clone(),
        serde_json::to_value(row.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
        row.engine.label().to_string(),
        row.time_to_notification.map_or_else(|| "-".to_string(), format_duration),
        row.locations_with_tracker_until_notification.map_or_else(|| "-".to_string(), |n| n.to_string()),
    ]
}

/// Renders rows, plus the fleet report for JSON, with a fixed column order.
/// In JSON every row is one line and the fleet report is a final
/// `{"fleet": ...}` line.
pub fn emit_report(rows: &[ComparisonRow], fleet: Option<&FleetReport>, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Table => {
            let body: Vec<[String; 6]> = rows.iter().map(cells).collect();
            let mut widths = COLUMNS.map(str::len);
            for r in &body {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.len());
                }
            }
            let line = |out: &mut String, r: &[&str]| {
                let padded: Vec<String> = r.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
                let _ = writeln!(out, "{}", padded.join("  ").trim_end());
            };
            line(&mut out, &COLUMNS);
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "{}", rule.join("  "));
            for r in &body {
                line(&mut out, &r.iter().map(String::as_str).collect::<Vec<_>>());
            }
        }
        ReportFormat::Json => {
            for r in rows {
                let _ = writeln!(out, "{}", serde_json::to_string(r).expect("rows serialize"));
            }
            if let Some(f) = fleet {
                let _ = writeln!(out, "{}", serde_json::json!({ "fleet": f }));
            }
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["position", "tracker", "kind", "engine", "time_to_notification_s", "locations"])
                .expect("in-memory csv");
            for r in rows {
                let c = cells(r);
                let secs = r.time_to_notification.map(|s| s.to_string()).unwrap_or_default();
                let locs = r.locations_with_tracker_until_notification.map(|n| n.to_string()).unwrap_or_default();
                w.write_record([&c[0], &c[1], &c[2], &c[3], &secs, &locs]).expect("in-memory csv");
            }
            out = String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8");
        }
    }
    out
}

/// A constraint on every row it selects. Unset selectors match any row.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowExpectation {
    pub position: Option<String>,
    pub tracker: Option<String>,
    pub engine: Option<Detector>,
    pub notified: Option<bool>,
    pub min_time_s: Option<i64>,
    pub max_time_s: Option<i64>,
    pub locations: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    #[serde(default)]
    pub rows: Vec<RowExpectation>,
}

impl Expectations {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }
}

impl RowExpectation {
    fn selects(&self, r: &ComparisonRow) -> bool {
        self.position.as_ref().is_none_or(|p| *p == r.position)
            && self.tracker.as_ref().is_none_or(|t| *t == r.tracker)
            && self.engine.is_none_or(|e| e == r.engine)
    }

    fn violations(&self, r: &ComparisonRow) -> Vec<String> {
        let mut v = Vec::new();
        let t = r.time_to_notification;
        if let Some(n) = self.notified {
            if t.is_some() != n {
                v.push(format!("expected notified = {n}"));
            }
        }
        if let Some(min) = self.min_time_s {
            if t.is_none_or(|t| t < min) {
                v.push(format!("expected time >= {}", format_duration(min)));
            }
        }
        if let Some(max) = self.max_time_s {
            if t.is_none_or(|t| t > max) {
                v.push(format!("expected time <= {}", format_duration(max)));
            }
        }
        if let Some(l) = self.locations {
            if r.locations_with_tracker_until_notification != Some(l) {
                v.push(format!("expected locations = {l}"));
            }
        }
        v
    }
}

/// Human-readable mismatches; empty when every expectation holds.
pub fn check_expectations(rows: &[ComparisonRow], exp: &Expectations) -> Vec<String> {
    let mut out = Vec::new();
    for (i, e) in exp.rows.iter().enumerate() {
        let selected: Vec<_> = rows.iter().filter(|r| e.selects(r)).collect();
        if selected.is_empty() {
            out.push(format!("rows[{i}]: matches no row"));
        }
        for r in selected {
            for msg in e.violations(r) {
                let got = r.time_to_notification.map_or_else(|| "-".to_string(), format_duration);
                out.push(format!("rows[{i}] {} / {} / {}: {msg}, got {got}", r.position, r.tracker, r.engine));
            }
        }
    }
    out
}
