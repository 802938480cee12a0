// SPDX-License-Identifier: Apache-2.0
//! Mutation-based check that a refactored suite preserves the original
//! suite's fault-detection power.
//!
//! Mutants touch function bodies only, so they apply identically to a suite
//! and to its refactored form. Each mutant is applied on its own and the
//! suite of the affected file is rerun; other files cannot call into it.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::testlang::{expr_to_string, BinaryOp, Expr, ParsedFile, Stmt, TestStatus, UnaryOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MutationOperator {
    RelationalReplace,
    ArithmeticReplace,
    NegateCondition,
    ConstantPerturb,
}

impl MutationOperator {
    pub const ALL: [MutationOperator; 4] = [
        MutationOperator::RelationalReplace,
        MutationOperator::ArithmeticReplace,
        MutationOperator::NegateCondition,
        MutationOperator::ConstantPerturb,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutant {
    pub id: u32,
    pub file: String,
    pub function: String,
    /// Preorder index of the mutated expression within the function body.
    pub site: usize,
    pub operator: MutationOperator,
    pub original: String,
    pub mutated: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidatorError {
    #[error("mutant {id}: no file `{file}` in the suite")]
    UnknownFile { id: u32, file: String },
    #[error("mutant {id} does not apply: {reason}")]
    Inapplicable { id: u32, reason: String },
    #[error("kill matrices cover different mutants (only in original: {only_original:?}, only in refactored: {only_refactored:?})")]
    MismatchedIds {
        only_original: Vec<u32>,
        only_refactored: Vec<u32>,
    },
}

const RELATIONAL: [BinaryOp; 6] = [
    BinaryOp::Lt,
    BinaryOp::Le,
    BinaryOp::Gt,
    BinaryOp::Ge,
    BinaryOp::Eq,
    BinaryOp::Ne,
];
const ARITHMETIC: [BinaryOp; 5] = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div, BinaryOp::Rem];

/// An expression slot of a function body, in preorder.
struct Site<'a> {
    expr: &'a Expr,
    is_condition: bool,
}

fn collect_sites<'a>(block: &'a [Stmt], out: &mut Vec<Site<'a>>) {
    fn expr<'a>(e: &'a Expr, is_condition: bool, out: &mut Vec<Site<'a>>) {
        out.push(Site { expr: e, is_condition });
        match e {
            Expr::Call { args, .. } => args.iter().for_each(|a| expr(a, false, out)),
            Expr::Binary { lhs, rhs, .. } => {
                expr(lhs, false, out);
                expr(rhs, false, out);
            }
            Expr::Unary { operand, .. } => expr(operand, false, out),
            _ => {}
        }
    }
    for stmt in block {
        match stmt {
            Stmt::Let { init: Some(e), .. }
            | Stmt::Assign { value: e, .. }
            | Stmt::Throw(e)
            | Stmt::Return(Some(e))
            | Stmt::Expr(e)
            | Stmt::Assert(e)
            | Stmt::Fail(e) => expr(e, false, out),
            Stmt::AssertEquals(a, b) => {
                expr(a, false, out);
                expr(b, false, out);
            }
            Stmt::If {
                cond,
                then_block,
                else_block,
                ..
            } => {
                expr(cond, true, out);
                collect_sites(then_block, out);
                if let Some(b) = else_block {
                    collect_sites(b, out);
                }
            }
            Stmt::While { cond, body } => {
                expr(cond, true, out);
                collect_sites(body, out);
            }
            Stmt::Try { body, handler, .. } => {
                collect_sites(body, out);
                collect_sites(handler, out);
            }
            Stmt::Let { init: None, .. } | Stmt::Return(None) | Stmt::HookCall(_) => {}
        }
    }
}

/// Replacement expressions for one site under `operator`, distinct from the
/// original and from each other, in a fixed order.
fn candidates(site: &Site<'_>, operator: MutationOperator) -> Vec<Expr> {
    let mut out: Vec<Expr> = Vec::new();
    match (operator, site.expr) {
        (MutationOperator::RelationalReplace, Expr::Binary { op, lhs, rhs }) if op.is_relational() => {
            for alt in RELATIONAL.into_iter().filter(|a| a != op) {
                out.push(Expr::Binary {
                    op: alt,
                    lhs: lhs.clone(),
                    rhs: rhs.clone(),
                });
            }
        }
        (MutationOperator::ArithmeticReplace, Expr::Binary { op, lhs, rhs }) if op.is_arithmetic() => {
            for alt in ARITHMETIC.into_iter().filter(|a| a != op) {
                out.push(Expr::Binary {
                    op: alt,
                    lhs: lhs.clone(),
                    rhs: rhs.clone(),
                });
            }
        }
        (MutationOperator::NegateCondition, e) if site.is_condition => out.push(Expr::Unary {
            op: UnaryOp::Not,
            operand: Box::new(e.clone()),
        }),
        (MutationOperator::ConstantPerturb, Expr::Int(k)) => {
            for v in [k.checked_add(1), k.checked_sub(1), Some(0)].into_iter().flatten() {
                if v != *k && !out.contains(&Expr::Int(v)) {
                    out.push(Expr::Int(v));
                }
            }
        }
        _ => {}
    }
    out
}

/// Enumerates mutants over every function of `files`, ordered by file,
/// function, site, then operator. With `max`, draws a uniform sample without
/// replacement from that enumeration; ids always index the full enumeration.
pub fn generate_mutants(
    files: &[ParsedFile],
    operators: &[MutationOperator],
    seed: u64,
    max: Option<usize>,
) -> Vec<Mutant> {
    let mut files: Vec<&ParsedFile> = files.iter().collect();
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let mut operators = operators.to_vec();
    operators.sort();
    operators.dedup();

    let mut all = Vec::new();
    for file in files {
        let mut functions: Vec<_> = file.functions.iter().collect();
        functions.sort_by(|a, b| a.name.cmp(&b.name));
        for function in functions {
            let mut sites = Vec::new();
            collect_sites(&function.body, &mut sites);
            for (index, site) in sites.iter().enumerate() {
                let original = expr_to_string(site.expr);
                for &operator in &operators {
                    for replacement in candidates(site, operator) {
                        all.push(Mutant {
                            id: all.len() as u32,
                            file: file.path.clone(),
                            function: function.name.clone(),
                            site: index,
                            operator,
                            original: original.clone(),
                            mutated: expr_to_string(&replacement),
                        });
                    }
                }
            }
        }
    }
    match max {
        Some(max) if max < all.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = rand::seq::index::sample(&mut rng, all.len(), max).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| all[i].clone()).collect()
        }
        _ => all,
    }
}

/// Returns a copy of `file` with `mutant` applied.
pub fn apply_mutant(file: &ParsedFile, mutant: &Mutant) -> Result<ParsedFile, ValidatorError> {
    let inapplicable = |reason: String| ValidatorError::Inapplicable { id: mutant.id, reason };
    let function = file
        .function(&mutant.function)
        .ok_or_else(|| inapplicable(format!("no function `{}`", mutant.function)))?;
    let mut sites = Vec::new();
    collect_sites(&function.body, &mut sites);
    let site = sites
        .get(mutant.site)
        .ok_or_else(|| inapplicable(format!("no site {} in `{}`", mutant.site, mutant.function)))?;
    if expr_to_string(site.expr) != mutant.original {
        return Err(inapplicable(format!(
            "site {} is `{}`, expected `{}`",
            mutant.site,
            expr_to_string(site.expr),
            mutant.original
        )));
    }
    let replacement = candidates(site, mutant.operator)
        .into_iter()
        .find(|e| expr_to_string(e) == mutant.mutated)
        .ok_or_else(|| inapplicable(format!("`{}` is not a {:?} mutation", mutant.mutated, mutant.operator)))?;

    let mut out = file.clone();
    let body = &mut out
        .functions
        .iter_mut()
        .find(|f| f.name == mutant.function)
        .expect("function located above")
        .body;
    let mut counter = 0;
    replace_site(body, mutant.site, &replacement, &mut counter);
    Ok(out)
}

/// Walks in the same preorder as `collect_sites`, replacing the `target`-th
/// expression. Returns true once replaced.
fn replace_site(block: &mut [Stmt], target: usize, replacement: &Expr, counter: &mut usize) -> bool {
    fn expr(e: &mut Expr, target: usize, replacement: &Expr, counter: &mut usize) -> bool {
        if *counter == target {
            *e = replacement.clone();
            return true;
        }
        *counter += 1;
        match e {
            Expr::Call { args, .. } => args.iter_mut().any(|a| expr(a, target, replacement, counter)),
            Expr::Binary { lhs, rhs, .. } => {
                expr(lhs, target, replacement, counter) || expr(rhs, target, replacement, counter)
            }
            Expr::Unary { operand, .. } => expr(operand, target, replacement, counter),
            _ => false,
        }
    }
    for stmt in block {
        let done = match stmt {
            Stmt::Let { init: Some(e), .. }
            | Stmt::Assign { value: e, .. }
            | Stmt::Throw(e)
            | Stmt::Return(Some(e))
            | Stmt::Expr(e)
            | Stmt::Assert(e)
            | Stmt::Fail(e) => expr(e, target, replacement, counter),
            Stmt::AssertEquals(a, b) => {
                expr(a, target, replacement, counter) || expr(b, target, replacement, counter)
            }
            Stmt::If {
                cond,
                then_block,
                else_block,
                ..
            } => {
                expr(cond, target, replacement, counter)
                    || replace_site(then_block, target, replacement, counter)
                    || else_block
                        .as_mut()
                        .is_some_and(|b| replace_site(b, target, replacement, counter))
            }
            Stmt::While { cond, body } => {
                expr(cond, target, replacement, counter) || replace_site(body, target, replacement, counter)
            }
            Stmt::Try { body, handler, .. } => {
                replace_site(body, target, replacement, counter)
                    || replace_site(handler, target, replacement, counter)
            }
            Stmt::Let { init: None, .. } | Stmt::Return(None) | Stmt::HookCall(_) => false,
        };
        if done {
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KillOutcome {
    Killed,
    Alive,
    Hang,
}

impl KillOutcome {
    /// Folds the statuses of one suite run.
    pub fn from_statuses(statuses: impl IntoIterator<Item = TestStatus>) -> KillOutcome {
        let mut hang = false;
        for status in statuses {
            match status {
                TestStatus::AssertionFailed | TestStatus::UncaughtException => return KillOutcome::Killed,
                TestStatus::BudgetExceeded => hang = true,
                TestStatus::Passed | TestStatus::Skipped => {}
            }
        }
        if hang {
            KillOutcome::Hang
        } else {
            KillOutcome::Alive
        }
    }
}

impl fmt::Display for KillOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KillMatrix {
    pub outcomes: BTreeMap<u32, KillOutcome>,
}

impl KillMatrix {
    pub fn count(&self, outcome: KillOutcome) -> usize {
        self.outcomes.values().filter(|o| **o == outcome).count()
    }
}

/// Mutants that could not be evaluated, with the reason.
pub type MutantFailures = Vec<(u32, ValidatorError)>;

/// Runs the suite of the affected file once per mutant.
pub fn kill_matrix(files: &[ParsedFile], mutants: &[Mutant], budget: u64) -> (KillMatrix, MutantFailures) {
    let results: Vec<(u32, Result<KillOutcome, ValidatorError>)> = mutants
        .par_iter()
        .map(|m| {
            let outcome = files
                .iter()
                .find(|f| f.path == m.file)
                .ok_or_else(|| ValidatorError::UnknownFile {
                    id: m.id,
                    file: m.file.clone(),
                })
                .and_then(|f| apply_mutant(f, m))
                .map(|mutated| {
                    let results = crate::testlang::run_file(&mutated, None, budget);
                    KillOutcome::from_statuses(results.iter().map(|r| r.outcome.status))
                });
            (m.id, outcome)
        })
        .collect();

    let mut matrix = KillMatrix::default();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(outcome) => {
                matrix.outcomes.insert(id, outcome);
            }
            Err(e) => failures.push((id, e)),
        }
    }
    (matrix, failures)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disagreement {
    pub id: u32,
    pub original: KillOutcome,
    pub refactored: KillOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub mutants: usize,
    pub killed_both: usize,
    pub alive_both: usize,
    pub hang_both: usize,
    pub disagreements: Vec<Disagreement>,
    pub equivalent: bool,
}

impl EquivalenceReport {
    pub fn agreement_percent(&self) -> f64 {
        if self.mutants == 0 {
            100.0
        } else {
            100.0 * (self.mutants - self.disagreements.len()) as f64 / self.mutants as f64
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<22} {:>8}", "Outcome", "Mutants");
        for (label, n) in [
            ("Killed in both", self.killed_both),
            ("Alive in both", self.alive_both),
            ("Hang in both", self.hang_both),
            ("Disagreements", self.disagreements.len()),
            ("Total", self.mutants),
        ] {
            let _ = writeln!(out, "{label:<22} {n:>8}");
        }
        for d in &self.disagreements {
            let _ = writeln!(out, "  mutant {}: original {}, refactored {}", d.id, d.original, d.refactored);
        }
        let _ = writeln!(
            out,
            "agreement {:.2}%: {}",
            self.agreement_percent(),
            if self.equivalent { "equivalent" } else { "NOT equivalent" }
        );
        out
    }
}

pub fn compare_matrices(original: &KillMatrix, refactored: &KillMatrix) -> Result<EquivalenceReport, ValidatorError> {
    let only_original: Vec<u32> = original
        .outcomes
        .keys()
        .filter(|id| !refactored.outcomes.contains_key(id))
        .copied()
        .collect();
    let only_refactored: Vec<u32> = refactored
        .outcomes
        .keys()
        .filter(|id| !original.outcomes.contains_key(id))
        .copied()
        .collect();
    if !only_original.is_empty() || !only_refactored.is_empty() {
        return Err(ValidatorError::MismatchedIds {
            only_original,
            only_refactored,
        });
    }
    let mut report = EquivalenceReport {
        mutants: original.outcomes.len(),
        killed_both: 0,
        alive_both: 0,
        hang_both: 0,
        disagreements: Vec::new(),
        equivalent: true,
    };
    for (id, &a) in &original.outcomes {
        let b = refactored.outcomes[id];
        match (a, b) {
            (KillOutcome::Killed, KillOutcome::Killed) => report.killed_both += 1,
            (KillOutcome::Alive, KillOutcome::Alive) => report.alive_both += 1,
            (KillOutcome::Hang, KillOutcome::Hang) => report.hang_both += 1,
            _ => report.disagreements.push(Disagreement {
                id: *id,
                original: a,
                refactored: b,
            }),
        }
    }
    report.equivalent = report.disagreements.is_empty();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testlang::parse_file;

    fn file(src: &str) -> ParsedFile {
        parse_file(src, "m.tl").unwrap()
    }

    #[test]
    fn relational_replacement_reaches_the_off_by_one() {
        let f = file("fn g(n) { if (n < 0) { throw \"neg\"; } return n; }");
        let ms = generate_mutants(&[f], &[MutationOperator::RelationalReplace], 0, None);
        let mutated: Vec<_> = ms.iter().map(|m| m.mutated.as_str()).collect();
        assert_eq!(mutated, ["n <= 0", "n > 0", "n >= 0", "n == 0", "n != 0"]);
        assert!(ms.iter().all(|m| m.original == "n < 0" && m.site == 0));
    }

    #[test]
    fn every_operator_and_site_order() {
        let f = file("fn g(a) { while (a > 1) { a = a - 1; } return a; }");
        let ms = generate_mutants(&[f], &MutationOperator::ALL, 0, None);
        // site 0 `a > 1`: 5 relational + 1 negation; 2 `1`: 2; 3 `a - 1`: 4; 5 `1`: 2
        assert_eq!(ms.len(), 14);
        assert_eq!(ms.iter().map(|m| m.id).collect::<Vec<_>>(), (0..14).collect::<Vec<_>>());
        assert_eq!(ms[5].mutated, "!(a > 1)");
        assert!(ms.iter().all(|m| m.original != m.mutated));
        let perturbed: Vec<_> = ms
            .iter()
            .filter(|m| m.operator == MutationOperator::ConstantPerturb && m.site == 2)
            .map(|m| m.mutated.as_str())
            .collect();
        assert_eq!(perturbed, ["2", "0"]);
    }

    #[test]
    fn no_functions_no_mutants() {
        let f = file("test t { assert(1 < 2); }");
        assert!(generate_mutants(&[f], &MutationOperator::ALL, 0, None).is_empty());
    }

    #[test]
    fn sampling_is_seeded() {
        let f = file("fn g(a, b) { if (a < b) { return a + b * 2 - 1; } return a % 3; }");
        let files = [f];
        let all = generate_mutants(&files, &MutationOperator::ALL, 0, None);
        let a = generate_mutants(&files, &MutationOperator::ALL, 9, Some(5));
        let b = generate_mutants(&files, &MutationOperator::ALL, 9, Some(5));
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(a.windows(2).all(|w| w[0].id < w[1].id));
        assert!(a.iter().all(|m| all[m.id as usize] == *m));
        assert_eq!(generate_mutants(&files, &MutationOperator::ALL, 9, Some(1000)), all);
    }

    #[test]
    fn applying_changes_exactly_one_site() {
        let f = file("fn g(n) { if (n < 0) { return 0 - n; } return n; }");
        let ms = generate_mutants(std::slice::from_ref(&f), &MutationOperator::ALL, 0, None);
        for m in &ms {
            let g = apply_mutant(&f, m).unwrap();
            assert_ne!(g, f);
            let mut before = Vec::new();
            let mut after = Vec::new();
            collect_sites(&f.functions[0].body, &mut before);
            collect_sites(&g.functions[0].body, &mut after);
            assert_eq!(expr_to_string(after[m.site].expr), m.mutated);
        }
        let mut stale = ms[0].clone();
        stale.original = "x".into();
        assert!(matches!(apply_mutant(&f, &stale), Err(ValidatorError::Inapplicable { .. })));
    }

    #[test]
    fn outcomes() {
        let src = "fn g(n) { if (n < 0) { throw \"neg\"; } return n; }\n\
                   fn loop(n) { let i = 0; while (i <= n) { i = i + 1; } return i; }\n\
                   test t { assertEquals(0, g(0)); assertEquals(4, loop(3)); }";
        let f = file(src);
        let files = [f];
        let ms = generate_mutants(&files, &MutationOperator::ALL, 0, None);
        let (matrix, failures) = kill_matrix(&files, &ms, 10_000);
        assert!(failures.is_empty());
        let pick = |func: &str, mutated: &str| {
            let m = ms.iter().find(|m| m.function == func && m.mutated == mutated).unwrap();
            matrix.outcomes[&m.id]
        };
        assert_eq!(pick("g", "n <= 0"), KillOutcome::Killed);
        assert_eq!(pick("g", "n == 0"), KillOutcome::Killed);
        assert_eq!(pick("g", "n > 0"), KillOutcome::Alive);
        assert_eq!(pick("loop", "i >= n"), KillOutcome::Killed);
        assert_eq!(pick("loop", "!(i <= n)"), KillOutcome::Killed);
        assert_eq!(pick("loop", "i - 1"), KillOutcome::Hang);
    }

    #[test]
    fn suite_without_assertions_kills_nothing() {
        let f = file("fn g(n) { if (n < 0) { return 1; } return n * 2; }\ntest t { g(3); g(-1); }");
        let files = [f];
        let ms = generate_mutants(&files, &MutationOperator::ALL, 0, None);
        let (matrix, _) = kill_matrix(&files, &ms, 10_000);
        // `n / 2` and friends still terminate and nothing is asserted
        assert_eq!(matrix.count(KillOutcome::Alive), ms.len());
    }

    #[test]
    fn comparison() {
        let mut a = KillMatrix::default();
        for id in 0..81 {
            a.outcomes.insert(id, KillOutcome::Killed);
        }
        for id in 81..99 {
            a.outcomes.insert(id, KillOutcome::Alive);
        }
        a.outcomes.insert(99, KillOutcome::Hang);
        let r = compare_matrices(&a, &a.clone()).unwrap();
        assert!(r.equivalent);
        assert_eq!((r.killed_both, r.alive_both, r.hang_both, r.mutants), (81, 18, 1, 100));

        let mut b = a.clone();
        b.outcomes.insert(7, KillOutcome::Alive);
        let r = compare_matrices(&a, &b).unwrap();
        assert!(!r.equivalent);
        assert_eq!(
            r.disagreements,
            [Disagreement {
                id: 7,
                original: KillOutcome::Killed,
                refactored: KillOutcome::Alive
            }]
        );
        assert!(r.to_text().contains("mutant 7: original Killed, refactored Alive"));

        b.outcomes.remove(&7);
        assert!(matches!(compare_matrices(&a, &b), Err(ValidatorError::MismatchedIds { .. })));
    }
}
