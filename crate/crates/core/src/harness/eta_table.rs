use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::numeric::format_float;
use crate::scheduler::Schedule;

/// Analytic values further than this from a printed value are flagged.
pub const ERRATUM_TOLERANCE: f64 = 0.01;

const REGISTRY_CSV: &str = include_str!("../../data/published_eta.csv");
const REGISTRY_NAME: &str = "data/published_eta.csv";

/// A published expected-cost value: the schedule, the step count it was
/// reported for, and the printed number.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishedEta {
    pub group: String,
    pub schedule: Schedule,
    pub steps: usize,
    pub printed: f64,
}

/// Splits one CSV line, honouring double-quoted fields (no escaped quotes).
fn split_fields(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut quoted = false;
    for c in line.chars() {
        match c {
            '"' => quoted = !quoted,
            ',' if !quoted => fields.push(std::mem::take(&mut current)),
            _ => current.push(c),
        }
    }
    fields.push(current);
    fields
}

fn quote(s: &str) -> String {
    if s.contains(',') {
        format!("\"{s}\"")
    } else {
        s.to_string()
    }
}

/// Parses registry CSV with header `group,schedule,steps,printed_eta`.
pub fn parse_registry(text: &str, path: &str) -> Result<Vec<PublishedEta>, HarnessError> {
    let bad = |reason: String| HarnessError::Format {
        what: "registry",
        path: path.to_string(),
        reason,
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some("group,schedule,steps,printed_eta") => {}
        other => return Err(bad(format!("unexpected header {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f = split_fields(line);
            if f.len() != 4 {
                return Err(bad(format!("row {}: expected 4 fields", i + 1)));
            }
            Ok(PublishedEta {
                group: f[0].clone(),
                schedule: f[1]
                    .parse()
                    .map_err(|e| bad(format!("row {}: {e}", i + 1)))?,
                steps: f[2]
                    .parse()
                    .map_err(|e| bad(format!("row {}: {e}", i + 1)))?,
                printed: f[3]
                    .parse()
                    .map_err(|e| bad(format!("row {}: {e}", i + 1)))?,
            })
        })
        .collect()
}

/// The registry shipped with the crate.
pub fn published_registry() -> Vec<PublishedEta> {
    parse_registry(REGISTRY_CSV, REGISTRY_NAME).expect("bundled registry is well formed")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaRow {
    pub schedule: String,
    pub exact: f64,
    pub closed_form: f64,
    pub published: Option<f64>,
    /// `|exact - published| > ERRATUM_TOLERANCE`.
    pub erratum: bool,
}

/// Expected cost of each schedule at `total` steps against the bundled
/// registry.
pub fn eta_table(schedules: &[Schedule], total: usize) -> Result<Vec<EtaRow>, HarnessError> {
    eta_table_with(schedules, total, &published_registry())
}

pub fn eta_table_with(
    schedules: &[Schedule],
    total: usize,
    registry: &[PublishedEta],
) -> Result<Vec<EtaRow>, HarnessError> {
    schedules
        .iter()
        .map(|s| {
            let report = s.eta_report(total)?;
            let published = registry
                .iter()
                .find(|r| r.schedule == *s)
                .map(|r| r.printed);
            Ok(EtaRow {
                schedule: s.to_string(),
                exact: report.exact,
                closed_form: report.closed_form,
                published,
                erratum: published.is_some_and(|p| (report.exact - p).abs() > ERRATUM_TOLERANCE),
            })
        })
        .collect()
}

/// CSV with header `schedule,exact,closed_form,published,erratum`.
pub fn eta_table_csv(rows: &[EtaRow]) -> String {
    let mut out = String::from("schedule,exact,closed_form,published,erratum\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            quote(&r.schedule),
            format_float(r.exact),
            format_float(r.closed_form),
            r.published.map(format_float).unwrap_or_default(),
            r.erratum
        ));
    }
    out
}

/// One canonical schedule per line; blank lines and `#` comments skipped.
pub fn read_schedule_list(text: &str) -> Result<Vec<Schedule>, HarnessError> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<Schedule>().map_err(HarnessError::from))
        .collect()
}
