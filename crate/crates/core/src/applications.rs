// SPDX-License-Identifier: Apache-2.0
//! Two analyses that consume purity: whether an `if` has the tests a
//! condition-repair tool needs, and whether the catch block of a `try`
//! behaves the same wherever its exception comes from.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::format_percent;
use crate::testlang::{
    execute_test, run_suite, DomainValue, ElementId, ElementKind, InjectionConfig, ParsedFile, RunError,
    SuiteResult, TestStatus,
};
use crate::trace::{test_signature, PurityAnalysis, Signature, TestKey};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AppError {
    #[error("element {0} is not an `if`")]
    NotIf(ElementId),
    #[error("element {0} is not a `try`")]
    NotTry(ElementId),
    #[error("no element {0} in the suite")]
    UnknownElement(ElementId),
    #[error("the suite was not traced on {0} elements")]
    Untraced(ElementKind),
    #[error("test `{test}` is impure on {element}")]
    ImpureTest { test: String, element: ElementId },
    #[error(transparent)]
    Run(#[from] RunError),
}

fn check_element(files: &[ParsedFile], e: &ElementId, kind: ElementKind) -> Result<(), AppError> {
    if e.kind != kind {
        return Err(match kind {
            ElementKind::If => AppError::NotIf(e.clone()),
            ElementKind::Try => AppError::NotTry(e.clone()),
        });
    }
    let exists = files
        .iter()
        .any(|f| f.path == e.file && f.elements_of(kind).contains(e));
    if exists {
        Ok(())
    } else {
        Err(AppError::UnknownElement(e.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairReadiness {
    pub element: ElementId,
    /// No covering test is impure on the element.
    pub purely_covered: bool,
    pub then_pure_tests: Vec<String>,
    pub else_pure_tests: Vec<String>,
    /// Covering tests that are impure on the element and cannot be used.
    pub discarded_tests: Vec<String>,
    pub has_failing: bool,
    pub has_passing: bool,
    pub ready: bool,
}

impl RepairReadiness {
    pub fn to_text(&self) -> String {
        let list = |v: &[String]| if v.is_empty() { "-".to_string() } else { v.join(", ") };
        let mut out = String::new();
        let _ = writeln!(out, "element:        {}", self.element);
        let _ = writeln!(out, "purely covered: {}", self.purely_covered);
        let _ = writeln!(out, "then (pure):    {}", list(&self.then_pure_tests));
        let _ = writeln!(out, "else (pure):    {}", list(&self.else_pure_tests));
        let _ = writeln!(out, "discarded:      {}", list(&self.discarded_tests));
        let _ = writeln!(out, "failing/passing: {}/{}", self.has_failing, self.has_passing);
        let _ = writeln!(out, "ready:          {}", self.ready);
        out
    }
}

/// Readiness of `e` given a run of `files` traced on `if` elements.
///
/// Tests are named by test name alone; elements never span files.
pub fn repair_readiness(files: &[ParsedFile], suite: &SuiteResult, e: &ElementId) -> Result<RepairReadiness, AppError> {
    check_element(files, e, ElementKind::If)?;
    if suite.element_kind != Some(ElementKind::If) {
        return Err(AppError::Untraced(ElementKind::If));
    }
    let mut r = RepairReadiness {
        element: e.clone(),
        purely_covered: true,
        then_pure_tests: Vec::new(),
        else_pure_tests: Vec::new(),
        discarded_tests: Vec::new(),
        has_failing: false,
        has_passing: false,
        ready: false,
    };
    for result in suite.tests.iter().filter(|t| t.file == e.file) {
        let list = match test_signature(&result.events, e, &result.test) {
            Signature::NotExecuted => continue,
            Signature::Impure => {
                r.purely_covered = false;
                r.discarded_tests.push(result.test.clone());
                continue;
            }
            Signature::Pure(DomainValue::ThenBranch) => &mut r.then_pure_tests,
            Signature::Pure(_) => &mut r.else_pure_tests,
        };
        list.push(result.test.clone());
        match result.outcome.status {
            TestStatus::Passed => r.has_passing = true,
            s if s.is_failure() => r.has_failing = true,
            _ => {}
        }
    }
    let executed = !(r.then_pure_tests.is_empty() && r.else_pure_tests.is_empty() && r.discarded_tests.is_empty());
    r.purely_covered &= executed;
    r.ready = !r.then_pure_tests.is_empty() && !r.else_pure_tests.is_empty() && r.has_failing && r.has_passing;
    Ok(r)
}

/// Traces `files` on `if` elements and checks `e`.
pub fn check_repair_readiness(files: &[ParsedFile], e: &ElementId, budget: u64) -> Result<RepairReadiness, AppError> {
    check_element(files, e, ElementKind::If)?;
    let suite = run_suite(files, Some(ElementKind::If), budget);
    repair_readiness(files, &suite, e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InjectionOutcome {
    Passes,
    Fails,
}

/// Runs `test` with an exception thrown on every entry into the body of the
/// `try` element `e`.
pub fn inject_and_run(file: &ParsedFile, e: &ElementId, test: &str, budget: u64) -> Result<InjectionOutcome, AppError> {
    check_element(std::slice::from_ref(file), e, ElementKind::Try)?;
    let (_, events) = execute_test(file, test, Some(ElementKind::Try), budget, None)?;
    if test_signature(&events, e, test) == Signature::Impure {
        return Err(AppError::ImpureTest {
            test: test.to_string(),
            element: e.clone(),
        });
    }
    injected_run(file, e, test, budget)
}

fn injected_run(file: &ParsedFile, e: &ElementId, test: &str, budget: u64) -> Result<InjectionOutcome, AppError> {
    let injection = InjectionConfig { element: e.clone() };
    let (outcome, _) = execute_test(file, test, None, budget, Some(injection))?;
    Ok(if outcome.status == TestStatus::Passed {
        InjectionOutcome::Passes
    } else {
        InjectionOutcome::Fails
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContractClass {
    SourceIndependent,
    SourceDependent,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractEntry {
    pub element: ElementId,
    pub class: ContractClass,
    /// Covering tests with a pure signature, keyed `file#test`.
    pub pure_tests: Vec<String>,
    pub failing_under_injection: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContractSummary {
    pub source_independent: usize,
    pub source_dependent: usize,
    pub unknown: usize,
    /// Executed `try` elements only.
    pub elements: Vec<ContractEntry>,
}

impl ContractSummary {
    pub fn class_of(&self, e: &ElementId) -> Option<ContractClass> {
        self.elements.iter().find(|c| &c.element == e).map(|c| c.class)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnknownImprovement {
    /// `after - before`; negative when unknowns were resolved.
    pub delta: i64,
    /// `(before - after) / before` as a percentage, `null` when `before` is 0.
    pub percent: Option<f64>,
    pub percent_text: String,
}

impl UnknownImprovement {
    pub fn new(before: usize, after: usize) -> Self {
        let percent = (before != 0).then(|| 100.0 * (before as f64 - after as f64) / before as f64);
        UnknownImprovement {
            delta: after as i64 - before as i64,
            percent,
            percent_text: format_percent(percent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractReport {
    pub before: ContractSummary,
    pub after: Option<ContractSummary>,
    pub improvement: Option<UnknownImprovement>,
}

impl ContractReport {
    /// Columns: before and after counts, then the change in unknowns.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let header = [
            "", "#Source-independent", "#Source-dependent", "#Unknown",
        ];
        let mut rows = vec![("Before", &self.before)];
        if let Some(after) = &self.after {
            rows.push(("After", after));
        }
        let _ = writeln!(
            out,
            "{:<7} {:>19} {:>17} {:>8}",
            header[0], header[1], header[2], header[3]
        );
        for (label, s) in rows {
            let _ = writeln!(
                out,
                "{label:<7} {:>19} {:>17} {:>8}",
                s.source_independent, s.source_dependent, s.unknown
            );
        }
        if let Some(imp) = &self.improvement {
            let _ = writeln!(out, "Improvement on #unknown: {} ({})", imp.delta, imp.percent_text);
        }
        let _ = writeln!(out);
        let mut elements: Vec<(&ContractEntry, Option<ContractClass>)> = self
            .before
            .elements
            .iter()
            .map(|c| (c, self.after.as_ref().and_then(|a| a.class_of(&c.element))))
            .collect();
        elements.sort_by_key(|a| a.0.element.to_string());
        for (c, after) in elements {
            let class = |k: ContractClass| serde_json::to_value(k).expect("class serializes");
            let mut line = format!("{}  {}", c.element, class(c.class).as_str().unwrap_or_default());
            if let Some(a) = after {
                let _ = write!(line, " -> {}", class(a).as_str().unwrap_or_default());
            }
            let _ = writeln!(out, "{line}");
        }
        out
    }
}

/// Classifies every executed `try` element of `files`.
pub fn contract_summary(files: &[ParsedFile], budget: u64) -> ContractSummary {
    let suite = run_suite(files, Some(ElementKind::Try), budget);
    let analysis = PurityAnalysis::new(files, &suite, ElementKind::Try);
    let coverage: Vec<_> = analysis.coverage().into_iter().filter(|c| c.executed).collect();

    // (element index, test key) pairs to inject
    let mut jobs: Vec<(usize, TestKey)> = Vec::new();
    for (i, cov) in coverage.iter().enumerate() {
        for (key, sig) in &cov.per_test {
            if matches!(sig, Signature::Pure(_)) {
                let test = key.rsplit_once('#').map(|(_, t)| t).unwrap_or(key);
                jobs.push((i, TestKey::new(&cov.element.file, test)));
            }
        }
    }
    let outcomes: Vec<(usize, String, InjectionOutcome)> = jobs
        .par_iter()
        .map(|(i, key)| {
            let file = files.iter().find(|f| f.path == key.file).expect("traced file");
            // a test that ran under tracing also runs under injection
            let outcome = injected_run(file, &coverage[*i].element, &key.test, budget).unwrap_or(InjectionOutcome::Fails);
            (*i, key.to_string(), outcome)
        })
        .collect();

    let mut summary = ContractSummary::default();
    for (i, cov) in coverage.iter().enumerate() {
        let mine: Vec<_> = outcomes.iter().filter(|(j, _, _)| *j == i).collect();
        let pure_tests: Vec<String> = mine.iter().map(|(_, k, _)| k.clone()).collect();
        let failing: Vec<String> = mine
            .iter()
            .filter(|(_, _, o)| *o == InjectionOutcome::Fails)
            .map(|(_, k, _)| k.clone())
            .collect();
        let class = if pure_tests.is_empty() {
            summary.unknown += 1;
            ContractClass::Unknown
        } else if !failing.is_empty() {
            summary.source_dependent += 1;
            ContractClass::SourceDependent
        } else {
            summary.source_independent += 1;
            ContractClass::SourceIndependent
        };
        summary.elements.push(ContractEntry {
            element: cov.element.clone(),
            class,
            pure_tests,
            failing_under_injection: failing,
        });
    }
    summary
}

/// Classifies the `try` elements of `files` and, when given, of their
/// refactored form.
pub fn classify_try_contracts(files: &[ParsedFile], refactored: Option<&[ParsedFile]>, budget: u64) -> ContractReport {
    let before = contract_summary(files, budget);
    let after = refactored.map(|r| contract_summary(r, budget));
    let improvement = after
        .as_ref()
        .map(|a| UnknownImprovement::new(before.unknown, a.unknown));
    ContractReport {
        before,
        after,
        improvement,
    }
}
