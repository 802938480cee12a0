// SPDX-License-Identifier: Apache-2.0
//! Splitting impure tests into pure fragments.
//!
//! The pipeline: trace the suite on one element kind, keep tests that are
//! already pure, cut the others between constituents so that each fragment
//! is homogeneous on every element (or is a single impure constituent),
//! promote variables shared across fragments to file scope, and emit each
//! fragment as a test tagged with its origin and order.

mod cuts;
mod hoist;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

pub use cuts::{build_fragments, compute_cuts, CutSet, Fragment, FragmentPurity};
pub use hoist::{hoist_shared_variables, Hoist};

use crate::testlang::{
    run_suite, Binding, ElementKind, FragmentMeta, Hook, ParsedFile, Stmt, TestCase, TestStatus,
};
use crate::trace::{PurityAnalysis, PurityClass, TestKey};

/// One impure test cut into fragments, ready to be emitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitTest {
    pub origin: String,
    pub fragments: Vec<Fragment>,
    /// Rewritten constituents of each fragment.
    pub bodies: Vec<Vec<Stmt>>,
    pub hoisted: Vec<Hoist>,
}

/// Emitted form of a fragment in a [`RefactorPlan`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedFragment {
    pub order: u32,
    pub range: [usize; 2],
    pub purity: FragmentPurity,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RefactorPlan {
    pub element_kind: Option<ElementKind>,
    /// Tests passed through unchanged, as `file#test`.
    pub kept: Vec<String>,
    pub split: BTreeMap<String, Vec<PlannedFragment>>,
    pub hoisted: BTreeMap<String, Vec<Hoist>>,
    /// Tests that exhausted the step budget while tracing; kept unsplit.
    pub budget_exceeded: Vec<String>,
    #[serde(skip)]
    pub output_files: Vec<ParsedFile>,
}

impl RefactorPlan {
    pub fn fragment_count(&self) -> usize {
        self.split.values().map(Vec::len).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Cuts one test given its signature matrix. Returns `None` when the test
/// does not need splitting (a single fragment).
pub fn split_test(
    test: &TestCase,
    matrix: &crate::trace::SignatureMatrix,
    taken: &mut BTreeSet<String>,
) -> Option<SplitTest> {
    let cuts = compute_cuts(&test.name, matrix);
    if cuts.cuts.len() < 2 {
        return None;
    }
    let fragments = build_fragments(&test.name, matrix, &cuts);
    let (bodies, hoisted) = hoist_shared_variables(test, &fragments, taken);
    Some(SplitTest {
        origin: test.name.clone(),
        fragments,
        bodies,
        hoisted,
    })
}

/// Replaces every split test of `file` by its fragments, in place, and adds
/// the hoisted variables as file bindings. Returns the fragment test names,
/// per origin.
pub fn synthesize_tests(file: &ParsedFile, splits: &[SplitTest]) -> (ParsedFile, BTreeMap<String, Vec<String>>) {
    let mut out = file.clone();
    let mut test_names: HashSet<String> = file.tests.iter().map(|t| t.name.clone()).collect();
    let mut names = BTreeMap::new();
    let mut tests = Vec::with_capacity(file.tests.len());

    for test in &file.tests {
        let Some(split) = splits.iter().find(|s| s.origin == test.name) else {
            tests.push(test.clone());
            continue;
        };
        let m = split.fragments.len();
        let mut fragment_names = Vec::with_capacity(m);
        for (fragment, body) in split.fragments.iter().zip(&split.bodies) {
            let base = format!("{}_fragment_{}", split.origin, fragment.order);
            let mut name = base.clone();
            let mut k = 2;
            while test_names.contains(&name) {
                name = format!("{base}_{k}");
                k += 1;
            }
            test_names.insert(name.clone());

            let mut constituents = Vec::with_capacity(body.len() + 2);
            if fragment.order == 1 && file.before_hook.is_some() {
                constituents.push(Stmt::HookCall(Hook::SetUp));
            }
            constituents.extend(body.iter().cloned());
            if fragment.order as usize == m && file.after_hook.is_some() {
                constituents.push(Stmt::HookCall(Hook::TearDown));
            }
            tests.push(TestCase {
                name: name.clone(),
                constituents,
                origin_meta: Some(FragmentMeta {
                    origin: split.origin.clone(),
                    order: fragment.order,
                }),
            });
            fragment_names.push(name);
        }
        for h in &split.hoisted {
            out.file_bindings.push(Binding {
                name: h.fresh.clone(),
                init: None,
            });
        }
        names.insert(split.origin.clone(), fragment_names);
    }
    out.tests = tests;
    (out, names)
}

/// Traces `files` on `kind`, keeps pure tests and splits the impure ones.
///
/// Tests that already carry fragment metadata are never split again, and
/// tests that exhaust the budget while tracing are passed through.
pub fn refactor_suite(files: &[ParsedFile], kind: ElementKind, budget: u64) -> RefactorPlan {
    let suite = run_suite(files, Some(kind), budget);
    let analysis = PurityAnalysis::new(files, &suite, kind);
    let mut plan = RefactorPlan {
        element_kind: Some(kind),
        ..RefactorPlan::default()
    };

    for file in files {
        let mut taken = hoist::identifiers(file);
        let mut splits = Vec::new();
        for test in &file.tests {
            let key = TestKey::new(&file.path, &test.name);
            let status = suite
                .result(&file.path, &test.name)
                .map(|r| r.outcome.status);
            if status == Some(TestStatus::BudgetExceeded) {
                plan.budget_exceeded.push(key.to_string());
                plan.kept.push(key.to_string());
                continue;
            }
            let Some(matrix) = analysis.matrix(&key) else {
                plan.kept.push(key.to_string());
                continue;
            };
            let needs_split = test.origin_meta.is_none()
                && matches!(
                    matrix.classify(),
                    PurityClass::NonAbsolutelyImpure | PurityClass::AbsolutelyImpure
                );
            match needs_split.then(|| split_test(test, matrix, &mut taken)).flatten() {
                Some(split) => splits.push(split),
                None => plan.kept.push(key.to_string()),
            }
        }

        let (output, names) = synthesize_tests(file, &splits);
        for split in &splits {
            let key = TestKey::new(&file.path, &split.origin).to_string();
            let fragment_names = &names[&split.origin];
            plan.split.insert(
                key.clone(),
                split
                    .fragments
                    .iter()
                    .zip(fragment_names)
                    .map(|(f, name)| PlannedFragment {
                        order: f.order,
                        range: [*f.range.start(), *f.range.end()],
                        purity: f.purity,
                        name: name.clone(),
                    })
                    .collect(),
            );
            if !split.hoisted.is_empty() {
                plan.hoisted.insert(key, split.hoisted.clone());
            }
        }
        plan.output_files.push(output);
    }
    plan
}
