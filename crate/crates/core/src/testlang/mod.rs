// SPDX-License-Identifier: Apache-2.0
//! The test language: a small imperative language whose files hold the
//! program under test (functions) together with its test suite.
//!
//! `if` and `try` statements inside function bodies are the tracked program
//! elements. Each top-level statement of a test body is a constituent.

mod ast;
mod interp;
mod lexer;
mod parser;
mod printer;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::*;
pub use interp::{
    DomainValue, InjectionConfig, RunOptions, TestOutcome, TestRun, TestStatus, TraceEvent, Value,
    INJECTED_EXCEPTION, MAX_CALL_DEPTH,
};
pub use printer::{block_to_string, expr_to_string, serialize_file, stmt_to_string, test_to_string};


/// Default number of interpreter steps granted to each test.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("duplicate {0}")]
    Duplicate(String),
    #[error("fragments of `{0}` do not form orders 1..m")]
    FragmentOrder(String),
    #[error("{0}")]
    Misplaced(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("no test named `{test}` in {file}")]
    UnknownTest { file: String, test: String },
    #[error("step budget must be positive")]
    ZeroBudget,
}

/// Parses `source`, assigning element ordinals to every `if`/`try` inside
/// function bodies.
pub fn parse_file(source: &str, path: &str) -> Result<ParsedFile, ParseError> {
    let file = parser::parse_file(source, path)?;
    check_placement(&file)?;
    Ok(file)
}

/// `return` belongs to functions; hook calls are top-level test statements.
fn check_placement(file: &ParsedFile) -> Result<(), ParseError> {
    fn walk(block: &[Stmt], allow_return: bool, top_level_test: bool, ctx: &str) -> Result<(), ParseError> {
        for stmt in block {
            match stmt {
                Stmt::Return(_) if !allow_return => {
                    return Err(ParseError::Misplaced(format!("`return` outside a function in {ctx}")))
                }
                Stmt::HookCall(h) if !top_level_test => {
                    return Err(ParseError::Misplaced(format!(
                        "`{}();` must be a top-level test statement ({ctx})",
                        h.keyword()
                    )))
                }
                Stmt::If {
                    then_block,
                    else_block,
                    ..
                } => {
                    walk(then_block, allow_return, false, ctx)?;
                    if let Some(b) = else_block {
                        walk(b, allow_return, false, ctx)?;
                    }
                }
                Stmt::While { body, .. } => walk(body, allow_return, false, ctx)?,
                Stmt::Try { body, handler, .. } => {
                    walk(body, allow_return, false, ctx)?;
                    walk(handler, allow_return, false, ctx)?;
                }
                _ => {}
            }
        }
        Ok(())
    }
    for f in &file.functions {
        walk(&f.body, true, false, &format!("function `{}`", f.name))?;
    }
    for t in &file.tests {
        walk(&t.constituents, false, true, &format!("test `{}`", t.name))?;
    }
    for (hook, name) in [(&file.before_hook, "setUp"), (&file.after_hook, "tearDown")] {
        if let Some(b) = hook {
            walk(b, false, false, name)?;
        }
    }
    Ok(())
}

/// The group of tests that must run in one session with `test`: its fragment
/// siblings when it carries origin metadata, otherwise itself.
fn session_of<'f>(file: &'f ParsedFile, test: &'f TestCase) -> Vec<&'f TestCase> {
    match &test.origin_meta {
        Some(meta) => file.fragments_of(&meta.origin),
        None => vec![test],
    }
}

/// Runs one test. A fragment is run after its preceding siblings (which
/// rebuild the shared state and consume the shared budget); only the
/// requested fragment's outcome and events are returned. Injection, when
/// given, is active only during the requested test.
pub fn execute_test(
    file: &ParsedFile,
    test: &str,
    element_kind: Option<ElementKind>,
    budget: u64,
    injection: Option<InjectionConfig>,
) -> Result<(TestOutcome, Vec<TraceEvent>), RunError> {
    if budget == 0 {
        return Err(RunError::ZeroBudget);
    }
    let target = file.test(test).ok_or_else(|| RunError::UnknownTest {
        file: file.path.clone(),
        test: test.to_string(),
    })?;
    let session = session_of(file, target);
    let index = session
        .iter()
        .position(|t| t.name == target.name)
        .expect("test belongs to its own session");
    let opts = RunOptions {
        tracking: element_kind,
        budget,
        injection,
    };
    let mut runs = interp::run_session(file, &session[..=index], &opts, Some(index));
    let run = runs.pop().expect("session yields the target run");
    Ok((run.outcome, run.events))
}

/// Per-test result inside a [`SuiteResult`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestResult {
    pub file: String,
    pub test: String,
    pub outcome: TestOutcome,
    #[serde(skip)]
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SuiteResult {
    pub element_kind: Option<ElementKind>,
    pub tests: Vec<TestResult>,
}

impl SuiteResult {
    /// All events, ordered by file, test declaration, then `seq`.
    pub fn trace_log(&self) -> Vec<TraceEvent> {
        self.tests.iter().flat_map(|t| t.events.iter().cloned()).collect()
    }

    pub fn result(&self, file: &str, test: &str) -> Option<&TestResult> {
        self.tests.iter().find(|t| t.file == file && t.test == test)
    }

    pub fn all_passed(&self) -> bool {
        self.tests.iter().all(|t| t.outcome.status == TestStatus::Passed)
    }
}

/// Runs every test of every file. Plain tests each get fresh interpreter
/// state; the fragments of one origin share a session. Files are independent
/// and run in parallel; results come back in file then declaration order.
pub fn run_suite(files: &[ParsedFile], element_kind: Option<ElementKind>, budget: u64) -> SuiteResult {
    use rayon::prelude::*;
    let tests = files
        .par_iter()
        .map(|f| run_file(f, element_kind, budget))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    SuiteResult { element_kind, tests }
}

pub(crate) fn run_file(file: &ParsedFile, element_kind: Option<ElementKind>, budget: u64) -> Vec<TestResult> {
    let opts = RunOptions {
        tracking: element_kind,
        budget,
        injection: None,
    };
    let mut done: HashSet<&str> = HashSet::new();
    let mut runs: Vec<TestRun> = Vec::with_capacity(file.tests.len());
    for test in &file.tests {
        if let Some(meta) = &test.origin_meta {
            if !done.insert(meta.origin.as_str()) {
                continue;
            }
        }
        let session = session_of(file, test);
        runs.extend(interp::run_session(file, &session, &opts, None));
    }
    // back to declaration order
    let position = |name: &str| file.tests.iter().position(|t| t.name == name);
    runs.sort_by_key(|r| position(&r.name));
    runs.into_iter()
        .map(|r| TestResult {
            file: file.path.clone(),
            test: r.name,
            outcome: r.outcome,
            events: r.events,
        })
        .collect()
}

/// Encodes events as JSON Lines.
pub fn trace_to_jsonl(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
        out.push('\n');
    }
    out
}

pub fn trace_from_jsonl(text: &str) -> Result<Vec<TraceEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
