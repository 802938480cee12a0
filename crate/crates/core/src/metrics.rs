// SPDX-License-Identifier: Apache-2.0
//! Purity statistics of a suite and their change under refactoring.
//!
//! Test-class percentages are taken against the number of tests, impure
//! constituents against all constituents, and element percentages against
//! the executed elements.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::testlang::{run_suite, ElementKind, ParsedFile, SuiteResult};
use crate::trace::{PurityAnalysis, PurityClass};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("cannot compare a {before} report with a {after} report")]
    KindMismatch { before: ElementKind, after: ElementKind },
    #[error("unknown report format `{0}` (expected text or json)")]
    UnknownFormat(String),
}

/// `part / whole` as a percentage, `None` when `whole` is 0.
pub fn percent(part: usize, whole: usize) -> Option<f64> {
    (whole != 0).then(|| 100.0 * part as f64 / whole as f64)
}

/// Two decimals and a percent sign, or `n/a`.
pub fn format_percent(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.2}%"),
        None => "n/a".to_string(),
    }
}

/// `(after - before) / before` as a percentage, `None` when `before` is 0.
pub fn relative_delta(before: usize, after: usize) -> Option<f64> {
    (before != 0).then(|| 100.0 * (after as f64 - before as f64) / before as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TestTotals {
    pub tests: usize,
    pub pure: usize,
    pub non_absolutely_impure: usize,
    pub absolutely_impure: usize,
    pub not_covering: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConstituentTotals {
    pub total: usize,
    pub impure: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ElementTotals {
    pub total: usize,
    pub executed: usize,
    pub purely_covered: usize,
    pub at_least_one_pure: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurityReport {
    pub element_kind: ElementKind,
    pub tests: TestTotals,
    pub constituents: ConstituentTotals,
    pub elements: ElementTotals,
}

impl PurityReport {
    pub fn from_analysis(analysis: &PurityAnalysis) -> Self {
        let mut tests = TestTotals::default();
        let mut constituents = ConstituentTotals::default();
        for (_, matrix) in &analysis.tests {
            tests.tests += 1;
            match matrix.classify() {
                PurityClass::Pure => tests.pure += 1,
                PurityClass::NonAbsolutelyImpure => tests.non_absolutely_impure += 1,
                PurityClass::AbsolutelyImpure => tests.absolutely_impure += 1,
                PurityClass::NotCovering => tests.not_covering += 1,
            }
            constituents.total += matrix.constituents;
            constituents.impure += matrix.impure_constituents();
        }
        let mut elements = ElementTotals::default();
        for cov in analysis.coverage() {
            elements.total += 1;
            elements.executed += usize::from(cov.executed);
            elements.purely_covered += usize::from(cov.purely_covered);
            elements.at_least_one_pure += usize::from(cov.at_least_one_pure);
        }
        PurityReport {
            element_kind: analysis.kind,
            tests,
            constituents,
            elements,
        }
    }

    pub fn pure_percent(&self) -> Option<f64> {
        percent(self.tests.pure, self.tests.tests)
    }

    pub fn purely_covered_percent(&self) -> Option<f64> {
        percent(self.elements.purely_covered, self.elements.executed)
    }
}

/// Traces `files` on `kind` and summarises the result.
pub fn purity_report(files: &[ParsedFile], kind: ElementKind, budget: u64) -> PurityReport {
    let suite = run_suite(files, Some(kind), budget);
    purity_report_of(files, &suite, kind)
}

/// Summarises an existing traced run of `files`.
pub fn purity_report_of(files: &[ParsedFile], suite: &SuiteResult, kind: ElementKind) -> PurityReport {
    PurityReport::from_analysis(&PurityAnalysis::new(files, suite, kind))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: String,
    pub before: usize,
    pub after: usize,
    pub absolute: i64,
    /// Percentage, `null` when `before` is 0.
    pub relative: Option<f64>,
    /// `relative` formatted to two decimals, or `n/a`.
    pub relative_text: String,
}

impl MetricDelta {
    pub fn new(metric: &str, before: usize, after: usize) -> Self {
        let relative = relative_delta(before, after);
        MetricDelta {
            metric: metric.to_string(),
            before,
            after,
            absolute: after as i64 - before as i64,
            relative,
            relative_text: format_percent(relative),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub element_kind: ElementKind,
    pub before: PurityReport,
    pub after: PurityReport,
    pub deltas: Vec<MetricDelta>,
}

impl ImprovementReport {
    pub fn delta(&self, metric: &str) -> Option<&MetricDelta> {
        self.deltas.iter().find(|d| d.metric == metric)
    }
}

pub const PURELY_COVERED: &str = "purely_covered";
pub const AT_LEAST_ONE_PURE: &str = "at_least_one_pure";

pub fn improvement_report(before: &PurityReport, after: &PurityReport) -> Result<ImprovementReport, MetricsError> {
    if before.element_kind != after.element_kind {
        return Err(MetricsError::KindMismatch {
            before: before.element_kind,
            after: after.element_kind,
        });
    }
    let (b, a) = (before, after);
    let deltas = vec![
        MetricDelta::new("executed", b.elements.executed, a.elements.executed),
        MetricDelta::new(PURELY_COVERED, b.elements.purely_covered, a.elements.purely_covered),
        MetricDelta::new(AT_LEAST_ONE_PURE, b.elements.at_least_one_pure, a.elements.at_least_one_pure),
        MetricDelta::new("tests", b.tests.tests, a.tests.tests),
        MetricDelta::new("pure", b.tests.pure, a.tests.pure),
        MetricDelta::new(
            "non_absolutely_impure",
            b.tests.non_absolutely_impure,
            a.tests.non_absolutely_impure,
        ),
        MetricDelta::new("absolutely_impure", b.tests.absolutely_impure, a.tests.absolutely_impure),
        MetricDelta::new("not_covering", b.tests.not_covering, a.tests.not_covering),
    ];
    Ok(ImprovementReport {
        element_kind: before.element_kind,
        before: before.clone(),
        after: after.clone(),
        deltas,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

impl FromStr for ReportFormat {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            other => Err(MetricsError::UnknownFormat(other.to_string())),
        }
    }
}

/// Something that renders as a text table and as JSON.
pub trait Report {
    fn to_text(&self) -> String;
    fn to_json(&self) -> String;
}

pub fn render_report<R: Report + ?Sized>(report: &R, format: &str) -> Result<String, MetricsError> {
    Ok(match format.parse::<ReportFormat>()? {
        ReportFormat::Text => report.to_text(),
        ReportFormat::Json => report.to_json(),
    })
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Writes a `|`-separated table with right-aligned cells.
fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        cells
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let _ = writeln!(out, "{}", line(&mut header.iter().copied()));
    let _ = writeln!(
        out,
        "{}",
        widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-")
    );
    for row in rows {
        let _ = writeln!(out, "{}", line(&mut row.iter().map(String::as_str)));
    }
}

impl Report for PurityReport {
    fn to_text(&self) -> String {
        let kind = self.element_kind;
        let t = &self.tests;
        let pct = |n| format_percent(percent(n, t.tests));
        let mut out = String::new();
        let _ = writeln!(out, "Test cases ({kind} elements)");
        table(
            &mut out,
            &[
                "#Total",
                "Pure",
                "%",
                "Non-absolutely impure",
                "%",
                "Absolutely impure",
                "%",
                "Not covering",
                "%",
            ],
            &[vec![
                t.tests.to_string(),
                t.pure.to_string(),
                pct(t.pure),
                t.non_absolutely_impure.to_string(),
                pct(t.non_absolutely_impure),
                t.absolutely_impure.to_string(),
                pct(t.absolutely_impure),
                t.not_covering.to_string(),
                pct(t.not_covering),
            ]],
        );
        let c = &self.constituents;
        let _ = writeln!(out, "\nTest constituents");
        table(
            &mut out,
            &["Total", "Impure", "%"],
            &[vec![
                c.total.to_string(),
                c.impure.to_string(),
                format_percent(percent(c.impure, c.total)),
            ]],
        );
        let e = &self.elements;
        let _ = writeln!(out, "\n{kind} elements");
        table(
            &mut out,
            &[
                "#Total",
                "#Executed",
                &format!("Purely covered {kind}"),
                "%",
                "At-least-one pure",
                "%",
            ],
            &[vec![
                e.total.to_string(),
                e.executed.to_string(),
                e.purely_covered.to_string(),
                format_percent(percent(e.purely_covered, e.executed)),
                e.at_least_one_pure.to_string(),
                format_percent(percent(e.at_least_one_pure, e.executed)),
            ]],
        );
        out
    }

    fn to_json(&self) -> String {
        json(self)
    }
}

impl Report for ImprovementReport {
    fn to_text(&self) -> String {
        let kind = self.element_kind;
        let mut out = String::new();
        let _ = writeln!(out, "Improvement ({kind} elements)");
        let row = |d: &MetricDelta| {
            vec![
                d.before.to_string(),
                d.after.to_string(),
                format!("{:+}", d.absolute),
                d.relative_text.clone(),
            ]
        };
        let pc = self.delta(PURELY_COVERED).expect("always present");
        let alo = self.delta(AT_LEAST_ONE_PURE).expect("always present");
        let mut cells = vec![self.after.elements.executed.to_string()];
        cells.extend(row(pc));
        cells.extend(row(alo));
        table(
            &mut out,
            &[
                &format!("#Executed {kind}"),
                "Purely covered #Before",
                "#After",
                "#",
                "%",
                "At-least-one pure #Before",
                "#After",
                "#",
                "%",
            ],
            &[cells],
        );
        let _ = writeln!(out, "\nTest cases");
        let rows: Vec<Vec<String>> = self
            .deltas
            .iter()
            .filter(|d| !matches!(d.metric.as_str(), "executed" | PURELY_COVERED | AT_LEAST_ONE_PURE))
            .map(|d| {
                let mut r = vec![d.metric.clone()];
                r.extend(row(d));
                r
            })
            .collect();
        table(&mut out, &["Metric", "#Before", "#After", "#", "%"], &rows);
        out
    }

    fn to_json(&self) -> String {
        json(self)
    }
}
