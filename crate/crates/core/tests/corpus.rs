// SPDX-License-Identifier: Apache-2.0
//! Whole-corpus checks over the fixtures.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use testpure::applications::{contract_summary, repair_readiness, ContractClass};
use testpure::corpus::load_paths;
use testpure::metrics::{purity_report, purity_report_of, Report};
use testpure::splitter::{refactor_suite, RefactorPlan};
use testpure::testlang::{run_suite, DomainValue, ElementKind, ParsedFile, TestStatus, DEFAULT_BUDGET};
use testpure::validator::KillOutcome;

const KINDS: [ElementKind; 2] = [ElementKind::If, ElementKind::Try];

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn corpus() -> &'static [ParsedFile] {
    static FILES: OnceLock<Vec<ParsedFile>> = OnceLock::new();
    FILES.get_or_init(|| load_paths(&[fixtures()]).unwrap())
}

fn refactored(kind: ElementKind) -> &'static RefactorPlan {
    static PLANS: OnceLock<[RefactorPlan; 2]> = OnceLock::new();
    let plans = PLANS.get_or_init(|| KINDS.map(|k| refactor_suite(corpus(), k, DEFAULT_BUDGET)));
    &plans[usize::from(kind == ElementKind::Try)]
}

fn outcomes_by_origin(files: &[ParsedFile]) -> BTreeMap<(String, String), KillOutcome> {
    let suite = run_suite(files, None, DEFAULT_BUDGET);
    let mut statuses: BTreeMap<(String, String), Vec<TestStatus>> = BTreeMap::new();
    for file in files {
        for test in &file.tests {
            let origin = test.origin_meta.as_ref().map_or(&test.name, |m| &m.origin);
            let status = suite.result(&file.path, &test.name).unwrap().outcome.status;
            statuses.entry((file.path.clone(), origin.clone())).or_default().push(status);
        }
    }
    statuses.into_iter().map(|(k, v)| (k, KillOutcome::from_statuses(v))).collect()
}

#[test]
fn refactoring_keeps_every_verdict() {
    let before = outcomes_by_origin(corpus());
    for kind in KINDS {
        assert_eq!(outcomes_by_origin(&refactored(kind).output_files), before, "{kind}");
    }
}

#[test]
fn executed_elements_are_conserved() {
    for kind in KINDS {
        let before = purity_report(corpus(), kind, DEFAULT_BUDGET);
        let after = purity_report(&refactored(kind).output_files, kind, DEFAULT_BUDGET);
        assert_eq!(before.elements.executed, after.elements.executed, "{kind}");
        assert_eq!(before.elements.total, after.elements.total, "{kind}");
        assert!(after.elements.purely_covered >= before.elements.purely_covered);
        assert!(after.elements.at_least_one_pure >= before.elements.at_least_one_pure);
    }
}

#[test]
fn impure_constituents_end_up_alone() {
    for kind in KINDS {
        let before = purity_report(corpus(), kind, DEFAULT_BUDGET);
        let after = purity_report(&refactored(kind).output_files, kind, DEFAULT_BUDGET);
        assert_eq!(after.tests.non_absolutely_impure, 0, "{kind}");
        assert_eq!(after.constituents.impure, before.constituents.impure, "{kind}");
        assert!(after.tests.absolutely_impure <= before.constituents.impure, "{kind}");
    }
}

/// Counts recomputed from the raw event log with plain value sets.
#[derive(Debug, Default, PartialEq, Eq)]
struct Recount {
    tests: [usize; 4],
    constituents: usize,
    impure_constituents: usize,
    executed: usize,
    purely_covered: usize,
    at_least_one_pure: usize,
}

fn recount(files: &[ParsedFile], kind: ElementKind) -> Recount {
    let suite = run_suite(files, Some(kind), DEFAULT_BUDGET);
    // (file, test, element) -> constituent -> values
    let mut seen: BTreeMap<(String, String, String), BTreeMap<usize, BTreeSet<DomainValue>>> = BTreeMap::new();
    for r in &suite.tests {
        for ev in r.events.iter().filter(|ev| ev.constituent > 0) {
            seen.entry((r.file.clone(), r.test.clone(), ev.element.to_string()))
                .or_default()
                .entry(ev.constituent)
                .or_default()
                .insert(ev.value);
        }
    }
    let mut out = Recount::default();
    for file in files {
        for test in &file.tests {
            out.constituents += test.constituents.len();
            let rows: Vec<_> = seen
                .iter()
                .filter(|((f, t, _), _)| f == &file.path && t == &test.name)
                .map(|(_, cols)| cols)
                .collect();
            let impure_cols: BTreeSet<usize> = rows
                .iter()
                .flat_map(|cols| cols.iter().filter(|(_, v)| v.len() > 1).map(|(c, _)| *c))
                .collect();
            out.impure_constituents += impure_cols.len();
            let union_sizes: Vec<usize> = rows
                .iter()
                .map(|cols| cols.values().flatten().collect::<BTreeSet<_>>().len())
                .collect();
            let slot = if union_sizes.is_empty() {
                3
            } else if union_sizes.iter().all(|&n| n == 1) {
                0
            } else if impure_cols.is_empty() {
                1
            } else {
                2
            };
            out.tests[slot] += 1;
        }
    }
    for file in files {
        for e in file.elements_of(kind) {
            let sizes: Vec<usize> = seen
                .iter()
                .filter(|((f, _, el), _)| f == &file.path && el == &e.to_string())
                .map(|(_, cols)| cols.values().flatten().collect::<BTreeSet<_>>().len())
                .collect();
            if !sizes.is_empty() {
                out.executed += 1;
                out.purely_covered += usize::from(sizes.iter().all(|&n| n == 1));
                out.at_least_one_pure += usize::from(sizes.contains(&1));
            }
        }
    }
    out
}

#[test]
fn reports_match_a_recount_of_the_log() {
    for kind in KINDS {
        for files in [corpus(), &refactored(kind).output_files] {
            let suite = run_suite(files, Some(kind), DEFAULT_BUDGET);
            let r = purity_report_of(files, &suite, kind);
            let got = Recount {
                tests: [
                    r.tests.pure,
                    r.tests.non_absolutely_impure,
                    r.tests.absolutely_impure,
                    r.tests.not_covering,
                ],
                constituents: r.constituents.total,
                impure_constituents: r.constituents.impure,
                executed: r.elements.executed,
                purely_covered: r.elements.purely_covered,
                at_least_one_pure: r.elements.at_least_one_pure,
            };
            assert_eq!(got, recount(files, kind), "{kind}");
            assert_eq!(r.tests.tests, got.tests.iter().sum::<usize>());
        }
    }
}

#[test]
fn definite_contracts_never_change() {
    let before = contract_summary(corpus(), DEFAULT_BUDGET);
    let after = contract_summary(&refactored(ElementKind::Try).output_files, DEFAULT_BUDGET);
    assert_eq!(before.elements.len(), after.elements.len());
    for entry in &before.elements {
        let now = after.class_of(&entry.element).unwrap();
        if entry.class != ContractClass::Unknown {
            assert_eq!(now, entry.class, "{}", entry.element);
        }
    }
    assert!(after.unknown < before.unknown);
}

#[test]
fn readiness_is_monotone() {
    let out = &refactored(ElementKind::If).output_files;
    let suite_before = run_suite(corpus(), Some(ElementKind::If), DEFAULT_BUDGET);
    let suite_after = run_suite(out, Some(ElementKind::If), DEFAULT_BUDGET);
    let mut gained = 0;
    for e in corpus().iter().flat_map(|f| f.elements_of(ElementKind::If)) {
        let before = repair_readiness(corpus(), &suite_before, &e);
        let after = repair_readiness(out, &suite_after, &e);
        match (before, after) {
            (Ok(b), Ok(a)) => {
                assert!(!b.ready || a.ready, "{e} lost readiness");
                gained += usize::from(!b.ready && a.ready);
            }
            (Err(_), Err(_)) => {}
            (b, a) => panic!("{e}: {b:?} vs {a:?}"),
        }
    }
    assert!(gained >= 1);
}

#[test]
fn corpus_report_matches_snapshot() {
    let mut text = String::new();
    for kind in KINDS {
        text.push_str(&purity_report(corpus(), kind, DEFAULT_BUDGET).to_text());
        text.push('\n');
    }
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/corpus_report.txt");
    if std::env::var_os("TESTPURE_BLESS").is_some() {
        std::fs::write(&golden, &text).unwrap();
    }
    let expected = std::fs::read_to_string(&golden).expect("golden file; set TESTPURE_BLESS=1 to create it");
    assert_eq!(text, expected);
}
