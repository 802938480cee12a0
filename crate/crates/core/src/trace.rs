// SPDX-License-Identifier: Apache-2.0
//! Execution signatures and purity classification.
//!
//! A signature summarises how an element behaved over a set of executions:
//! not at all (`NotExecuted`), always the same way (`Pure(v)`), or in more
//! than one way (`Impure`). Signatures form a join-semilattice
//! `NotExecuted < Pure(v) < Impure`, so the per-constituent signature `g` and
//! the per-test signature `f` are both plain folds of [`Signature::join`].
//!
//! Events raised while a hook runs carry constituent 0 and are excluded:
//! fixture code cannot be split, so it does not take part in purity.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::testlang::{DomainValue, ElementId, ElementKind, ParsedFile, SuiteResult, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Signature {
    NotExecuted,
    Pure(DomainValue),
    Impure,
}

impl Signature {
    pub fn join(self, other: Signature) -> Signature {
        use Signature::*;
        match (self, other) {
            (NotExecuted, s) | (s, NotExecuted) => s,
            (Pure(a), Pure(b)) if a == b => Pure(a),
            _ => Impure,
        }
    }

    pub fn observe(self, value: DomainValue) -> Signature {
        self.join(Signature::Pure(value))
    }

    pub fn is_executed(self) -> bool {
        self != Signature::NotExecuted
    }

    pub fn pure_value(self) -> Option<DomainValue> {
        match self {
            Signature::Pure(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signature::NotExecuted => f.write_str("not-executed"),
            Signature::Pure(v) => f.write_str(v.as_str()),
            Signature::Impure => f.write_str("impure"),
        }
    }
}

impl From<Signature> for String {
    fn from(s: Signature) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Signature {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        let all = [
            DomainValue::ThenBranch,
            DomainValue::ElseBranch,
            DomainValue::NoException,
            DomainValue::ExceptionCaught,
            DomainValue::ExceptionNotCaught,
        ];
        match s.as_str() {
            "not-executed" => Ok(Signature::NotExecuted),
            "impure" => Ok(Signature::Impure),
            other => all
                .iter()
                .find(|v| v.as_str() == other)
                .map(|v| Signature::Pure(*v))
                .ok_or_else(|| format!("unknown signature `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PurityClass {
    Pure,
    NonAbsolutelyImpure,
    AbsolutelyImpure,
    NotCovering,
}

/// A test identified across files.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TestKey {
    pub file: String,
    pub test: String,
}

impl TestKey {
    pub fn new(file: &str, test: &str) -> Self {
        TestKey {
            file: file.to_string(),
            test: test.to_string(),
        }
    }
}

/// Renders as `file#test`.
impl fmt::Display for TestKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.file, self.test)
    }
}

fn events_of<'a>(
    events: &'a [TraceEvent],
    e: &'a ElementId,
    test: &'a str,
) -> impl Iterator<Item = &'a TraceEvent> + 'a {
    // Tests only reach functions of their own file, so the element's file
    // pins down which test of that name produced the event.
    events.iter().filter(move |ev| ev.test == test && &ev.element == e)
}

/// `g(e, c)` for constituent `c` (1-based) of `test`.
pub fn constituent_signature(events: &[TraceEvent], e: &ElementId, test: &str, c: usize) -> Signature {
    events_of(events, e, test)
        .filter(|ev| ev.constituent == c)
        .fold(Signature::NotExecuted, |s, ev| s.observe(ev.value))
}

/// `f(e, t)`: the fold of every constituent signature of `test`.
pub fn test_signature(events: &[TraceEvent], e: &ElementId, test: &str) -> Signature {
    let mut per_constituent: BTreeMap<usize, Signature> = BTreeMap::new();
    for ev in events_of(events, e, test).filter(|ev| ev.constituent > 0) {
        let slot = per_constituent.entry(ev.constituent).or_insert(Signature::NotExecuted);
        *slot = slot.observe(ev.value);
    }
    per_constituent
        .values()
        .fold(Signature::NotExecuted, |acc, s| acc.join(*s))
}

/// Purity class of `test` over the elements of `elements` that
/// live in `test`'s file.
pub fn classify_test(events: &[TraceEvent], elements: &[ElementId], test: &TestKey) -> PurityClass {
    let mut row_signatures = Vec::new();
    let mut absolutely = false;
    for e in elements.iter().filter(|e| e.file == test.file) {
        let mut per_constituent: BTreeMap<usize, Signature> = BTreeMap::new();
        for ev in events_of(events, e, &test.test).filter(|ev| ev.constituent > 0) {
            let slot = per_constituent.entry(ev.constituent).or_insert(Signature::NotExecuted);
            *slot = slot.observe(ev.value);
        }
        absolutely |= per_constituent.values().any(|s| *s == Signature::Impure);
        row_signatures.push(
            per_constituent
                .values()
                .fold(Signature::NotExecuted, |acc, s| acc.join(*s)),
        );
    }
    classify(row_signatures.into_iter(), absolutely)
}

fn classify(mut test_signatures: impl Iterator<Item = Signature>, absolutely: bool) -> PurityClass {
    let mut executed = false;
    let mut impure = false;
    for s in test_signatures.by_ref() {
        executed |= s.is_executed();
        impure |= s == Signature::Impure;
    }
    match (executed, impure, absolutely) {
        (false, _, _) => PurityClass::NotCovering,
        (true, false, _) => PurityClass::Pure,
        (true, true, false) => PurityClass::NonAbsolutelyImpure,
        (true, true, true) => PurityClass::AbsolutelyImpure,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementCoverage {
    pub element: ElementId,
    pub executed: bool,
    pub purely_covered: bool,
    pub at_least_one_pure: bool,
    /// Signature of every test that executes the element, keyed `file#test`.
    pub per_test: BTreeMap<String, Signature>,
}

impl ElementCoverage {
    fn from_signatures(element: ElementId, per_test: BTreeMap<String, Signature>) -> Self {
        let executed = per_test.values().any(|s| s.is_executed());
        let any_impure = per_test.values().any(|s| *s == Signature::Impure);
        let at_least_one_pure = per_test.values().any(|s| matches!(s, Signature::Pure(_)));
        ElementCoverage {
            element,
            executed,
            purely_covered: executed && !any_impure,
            at_least_one_pure,
            per_test,
        }
    }
}

/// Coverage of `e` by the tests in `tests`.
pub fn element_coverage(events: &[TraceEvent], tests: &[TestKey], e: &ElementId) -> ElementCoverage {
    let per_test = tests
        .iter()
        .filter(|k| k.file == e.file)
        .map(|k| (k.to_string(), test_signature(events, e, &k.test)))
        .filter(|(_, s)| s.is_executed())
        .collect();
    ElementCoverage::from_signatures(e.clone(), per_test)
}

/// Per-constituent signatures of one test: `rows[e][c - 1] = g(e, c)` for
/// every element of the test's file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureMatrix {
    pub constituents: usize,
    pub rows: Vec<(ElementId, Vec<Signature>)>,
}

impl SignatureMatrix {
    pub fn new(constituents: usize) -> Self {
        SignatureMatrix {
            constituents,
            rows: Vec::new(),
        }
    }

    /// Builds a matrix from bare signature rows; element ids are synthetic.
    pub fn from_rows(constituents: usize, rows: Vec<Vec<Signature>>) -> Self {
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                assert_eq!(row.len(), constituents, "row length must equal constituent count");
                (ElementId::new(ElementKind::If, "_", "_", i as u32 + 1), row)
            })
            .collect();
        SignatureMatrix { constituents, rows }
    }

    /// `c` is 1-based.
    pub fn is_impure_constituent(&self, c: usize) -> bool {
        self.rows.iter().any(|(_, row)| row[c - 1] == Signature::Impure)
    }

    pub fn impure_constituents(&self) -> usize {
        (1..=self.constituents).filter(|c| self.is_impure_constituent(*c)).count()
    }

    pub fn test_signature(&self, e: &ElementId) -> Signature {
        self.rows
            .iter()
            .find(|(id, _)| id == e)
            .map(|(_, row)| row.iter().fold(Signature::NotExecuted, |a, s| a.join(*s)))
            .unwrap_or(Signature::NotExecuted)
    }

    pub fn classify(&self) -> PurityClass {
        let absolutely = (1..=self.constituents).any(|c| self.is_impure_constituent(c));
        classify(
            self.rows
                .iter()
                .map(|(_, row)| row.iter().fold(Signature::NotExecuted, |a, s| a.join(*s))),
            absolutely,
        )
    }
}

/// Signatures of every test of a traced suite, indexed once.
#[derive(Debug, Clone)]
pub struct PurityAnalysis {
    pub kind: ElementKind,
    /// Every element of `kind` declared in the analysed files.
    pub elements: Vec<ElementId>,
    pub tests: Vec<(TestKey, SignatureMatrix)>,
}

impl PurityAnalysis {
    /// `suite` must have been run with tracing on `kind` over `files`.
    pub fn new(files: &[ParsedFile], suite: &SuiteResult, kind: ElementKind) -> Self {
        let elements: Vec<ElementId> = files.iter().flat_map(|f| f.elements_of(kind)).collect();
        let by_file: HashMap<&str, &ParsedFile> = files.iter().map(|f| (f.path.as_str(), f)).collect();
        let mut tests = Vec::with_capacity(suite.tests.len());
        for result in &suite.tests {
            let Some(file) = by_file.get(result.file.as_str()) else {
                continue;
            };
            let Some(test) = file.test(&result.test) else {
                continue;
            };
            let n = test.constituents.len();
            let mut rows: Vec<(ElementId, Vec<Signature>)> = file
                .elements_of(kind)
                .into_iter()
                .map(|e| (e, vec![Signature::NotExecuted; n]))
                .collect();
            let index: HashMap<ElementId, usize> =
                rows.iter().enumerate().map(|(i, (e, _))| (e.clone(), i)).collect();
            for ev in &result.events {
                if ev.constituent == 0 || ev.constituent > n {
                    continue;
                }
                if let Some(&i) = index.get(&ev.element) {
                    let slot = &mut rows[i].1[ev.constituent - 1];
                    *slot = slot.observe(ev.value);
                }
            }
            tests.push((
                TestKey::new(&result.file, &result.test),
                SignatureMatrix { constituents: n, rows },
            ));
        }
        PurityAnalysis { kind, elements, tests }
    }

    pub fn matrix(&self, key: &TestKey) -> Option<&SignatureMatrix> {
        self.tests.iter().find(|(k, _)| k == key).map(|(_, m)| m)
    }

    pub fn classes(&self) -> Vec<(TestKey, PurityClass)> {
        self.tests.iter().map(|(k, m)| (k.clone(), m.classify())).collect()
    }

    pub fn coverage(&self) -> Vec<ElementCoverage> {
        let mut per_element: BTreeMap<&ElementId, BTreeMap<String, Signature>> =
            self.elements.iter().map(|e| (e, BTreeMap::new())).collect();
        for (key, matrix) in &self.tests {
            for (e, row) in &matrix.rows {
                let s = row.iter().fold(Signature::NotExecuted, |a, s| a.join(*s));
                if s.is_executed() {
                    if let Some(map) = per_element.get_mut(e) {
                        map.insert(key.to_string(), s);
                    }
                }
            }
        }
        self.elements
            .iter()
            .map(|e| ElementCoverage::from_signatures(e.clone(), per_element.remove(e).unwrap_or_default()))
            .collect()
    }

    pub fn document(&self) -> PurityDocument {
        PurityDocument {
            element_kind: self.kind,
            tests: self
                .classes()
                .into_iter()
                .map(|(k, class)| TestPurity {
                    file: k.file,
                    test: k.test,
                    class,
                })
                .collect(),
            elements: self.coverage(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestPurity {
    pub file: String,
    pub test: String,
    pub class: PurityClass,
}

/// JSON form of a purity analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurityDocument {
    pub element_kind: ElementKind,
    pub tests: Vec<TestPurity>,
    pub elements: Vec<ElementCoverage>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use DomainValue::*;
    use Signature::*;

    fn ev(test: &str, c: usize, e: &ElementId, value: DomainValue) -> TraceEvent {
        TraceEvent {
            test: test.into(),
            constituent: c,
            element: e.clone(),
            value,
            seq: 0,
        }
    }

    fn elem(n: u32) -> ElementId {
        ElementId::new(ElementKind::If, "a.tl", "f", n)
    }

    #[test]
    fn constituent_signatures() {
        let e = elem(1);
        let log = vec![ev("t", 1, &e, ThenBranch), ev("t", 1, &e, ThenBranch)];
        assert_eq!(constituent_signature(&log, &e, "t", 1), Pure(ThenBranch));
        let log = vec![ev("t", 1, &e, ThenBranch), ev("t", 1, &e, ElseBranch)];
        assert_eq!(constituent_signature(&log, &e, "t", 1), Impure);
        assert_eq!(constituent_signature(&[], &e, "t", 1), NotExecuted);
    }

    #[test]
    fn test_signatures_fold_constituents() {
        let e = elem(1);
        let log = vec![ev("t", 2, &e, ThenBranch)];
        assert_eq!(test_signature(&log, &e, "t"), Pure(ThenBranch));
        let log = vec![ev("t", 1, &e, ThenBranch), ev("t", 2, &e, ElseBranch)];
        assert_eq!(test_signature(&log, &e, "t"), Impure);
        let log = vec![
            ev("t", 1, &e, ThenBranch),
            ev("t", 2, &e, ThenBranch),
            ev("t", 2, &e, ElseBranch),
        ];
        assert_eq!(test_signature(&log, &e, "t"), Impure);
    }

    #[test]
    fn hook_events_are_ignored() {
        let e = elem(1);
        let log = vec![ev("t", 0, &e, ElseBranch), ev("t", 1, &e, ThenBranch)];
        assert_eq!(test_signature(&log, &e, "t"), Pure(ThenBranch));
    }

    #[test]
    fn classification() {
        let (e1, e2) = (elem(1), elem(2));
        let key = TestKey::new("a.tl", "t");
        let all = [e1.clone(), e2.clone()];
        // each element sees one value, different across elements: still pure
        let log = vec![ev("t", 1, &e1, ThenBranch), ev("t", 2, &e2, ElseBranch)];
        assert_eq!(classify_test(&log, &all, &key), PurityClass::Pure);
        let log = vec![ev("t", 1, &e1, ThenBranch), ev("t", 2, &e1, ElseBranch)];
        assert_eq!(classify_test(&log, &all, &key), PurityClass::NonAbsolutelyImpure);
        let log = vec![ev("t", 1, &e1, ThenBranch), ev("t", 1, &e1, ElseBranch)];
        assert_eq!(classify_test(&log, &all, &key), PurityClass::AbsolutelyImpure);
        assert_eq!(classify_test(&[], &all, &key), PurityClass::NotCovering);
    }

    #[test]
    fn coverage_flags() {
        let e = elem(1);
        let keys = [TestKey::new("a.tl", "t1"), TestKey::new("a.tl", "t2")];
        let log = vec![ev("t1", 1, &e, ThenBranch), ev("t2", 1, &e, ElseBranch)];
        let cov = element_coverage(&log, &keys, &e);
        assert!(cov.executed && cov.purely_covered && cov.at_least_one_pure);

        let log = vec![ev("t1", 1, &e, ThenBranch), ev("t1", 2, &e, ElseBranch)];
        let cov = element_coverage(&log, &keys, &e);
        assert!(cov.executed && !cov.purely_covered && !cov.at_least_one_pure);
        let log = vec![
            ev("t1", 1, &e, ThenBranch),
            ev("t1", 2, &e, ElseBranch),
            ev("t2", 1, &e, ElseBranch),
        ];
        let cov = element_coverage(&log, &keys, &e);
        assert!(!cov.purely_covered && cov.at_least_one_pure);

        let cov = element_coverage(&[], &keys, &e);
        assert!(!cov.executed && !cov.purely_covered && !cov.at_least_one_pure);
    }

    #[test]
    fn signature_json_is_a_string() {
        assert_eq!(serde_json::to_string(&Pure(ThenBranch)).unwrap(), "\"then-branch\"");
        let back: Signature = serde_json::from_str("\"impure\"").unwrap();
        assert_eq!(back, Impure);
    }
}
