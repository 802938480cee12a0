// SPDX-License-Identifier: Apache-2.0
//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use testpure::applications::{classify_try_contracts, repair_readiness, ContractClass, UnknownImprovement};
use testpure::corpus::load_paths;
use testpure::metrics::{format_percent, percent, purity_report, MetricDelta};
use testpure::splitter::{build_fragments, compute_cuts, refactor_suite};
use testpure::testlang::{
    run_suite, DomainValue, ElementId, ElementKind, Hook, ParsedFile, Stmt, DEFAULT_BUDGET,
};
use testpure::trace::{PurityAnalysis, Signature, SignatureMatrix};
use testpure::validator::{compare_matrices, generate_mutants, kill_matrix, MutationOperator};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn corpus() -> Vec<ParsedFile> {
    load_paths(&[fixtures()]).expect("fixture corpus loads")
}

fn fixture(name: &str) -> Vec<ParsedFile> {
    load_paths(&[fixtures().join(name)]).expect("fixture loads")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn criterion_1() -> Verdict {
    use DomainValue::{ElseBranch as E, ThenBranch as T};
    use Signature::{NotExecuted as B, Pure as P};
    let start = Instant::now();
    let m = SignatureMatrix::from_rows(7, vec![vec![B, P(T), B, P(E), B, P(E), P(T)]]);
    let cuts = compute_cuts("t", &m);
    let ranges: Vec<_> = build_fragments("t", &m, &cuts).into_iter().map(|f| f.range).collect();
    ensure(ranges == [1..=3, 4..=6, 7..=7], || format!("fragments {ranges:?}"))?;
    within(start, Duration::from_secs(1))?;
    Ok(format!("fragments {ranges:?}"))
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let files = fixture("factorial.tl");
    let plan = refactor_suite(&files, ElementKind::If, DEFAULT_BUDGET);
    let frags = plan
        .split
        .get("factorial.tl#testFactorial")
        .ok_or("testFactorial was not split")?;
    ensure(frags.len() == 2, || format!("{} fragments", frags.len()))?;
    ensure(plan.kept.contains(&"factorial.tl#testFactorialFail".to_string()), || {
        "testFactorialFail not kept".into()
    })?;
    let out = &plan.output_files;
    let first = out[0].test(&frags[0].name).ok_or("fragment 1 missing")?;
    let last = out[0].test(&frags[1].name).ok_or("fragment 2 missing")?;
    ensure(first.constituents.first() == Some(&Stmt::HookCall(Hook::SetUp)), || {
        "setUp not first in fragment 1".into()
    })?;
    ensure(last.constituents.last() == Some(&Stmt::HookCall(Hook::TearDown)), || {
        "tearDown not last in fragment 2".into()
    })?;

    let e: ElementId = "if:factorial.tl:factorialLog:1".parse().expect("element id");
    let before = repair_readiness(&files, &run_suite(&files, Some(ElementKind::If), DEFAULT_BUDGET), &e)
        .map_err(|e| e.to_string())?;
    let after = repair_readiness(out, &run_suite(out, Some(ElementKind::If), DEFAULT_BUDGET), &e)
        .map_err(|e| e.to_string())?;
    ensure(!before.ready && after.ready, || {
        format!("ready before={} after={}", before.ready, after.ready)
    })?;
    within(start, Duration::from_secs(5))?;
    Ok(format!(
        "2 fragments, readiness false -> true (then {:?}, else {:?})",
        after.then_pure_tests, after.else_pure_tests
    ))
}

fn criterion_3() -> Verdict {
    let mid = refactor_suite(&fixture("mid.tl"), ElementKind::If, DEFAULT_BUDGET);
    let n = mid.split.get("mid.tl#testMid_String").map_or(0, Vec::len);
    ensure(n == 4, || format!("testMid_String gave {n} fragments"))?;

    let pkg = refactor_suite(&fixture("package_name.tl"), ElementKind::If, DEFAULT_BUDGET);
    ensure(pkg.kept.contains(&"package_name.tl#test_getPackageName_Class".to_string()), || {
        "pure Class test was not kept".into()
    })?;
    let m = pkg.split.get("package_name.tl#test_getPackageName_String").map_or(0, Vec::len);
    ensure(m == 2, || format!("String test gave {m} fragments"))?;
    Ok("mid: 4 fragments; package name: pure test kept, impure test in 2".into())
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let files = corpus();
    ensure(files.len() >= 20, || format!("only {} corpus files", files.len()))?;
    let mutants = generate_mutants(&files, &MutationOperator::ALL, 0, Some(200));
    ensure(mutants.len() >= 100, || format!("only {} mutants", mutants.len()))?;
    let (original, failed) = kill_matrix(&files, &mutants, DEFAULT_BUDGET);
    ensure(failed.is_empty(), || format!("{} mutants did not apply", failed.len()))?;
    let mut summary = Vec::new();
    for kind in [ElementKind::If, ElementKind::Try] {
        let refactored = refactor_suite(&files, kind, DEFAULT_BUDGET).output_files;
        let (after, failed) = kill_matrix(&refactored, &mutants, DEFAULT_BUDGET);
        ensure(failed.is_empty(), || format!("{} mutants did not apply ({kind})", failed.len()))?;
        let report = compare_matrices(&original, &after).map_err(|e| e.to_string())?;
        ensure(report.equivalent, || {
            format!("{kind}: {} disagreements {:?}", report.disagreements.len(), report.disagreements)
        })?;
        summary.push(format!(
            "{kind}: {} killed/{} alive/{} hang in both",
            report.killed_both, report.alive_both, report.hang_both
        ));
    }
    within(start, Duration::from_secs(300))?;
    Ok(format!("{} files, {} mutants, 100% agreement; {}", files.len(), mutants.len(), summary.join("; ")))
}

fn criterion_5() -> Verdict {
    let mut strictly = BTreeSet::new();
    for file in corpus() {
        let one = std::slice::from_ref(&file);
        for kind in [ElementKind::If, ElementKind::Try] {
            let before = purity_report(one, kind, DEFAULT_BUDGET).elements;
            let refactored = refactor_suite(one, kind, DEFAULT_BUDGET).output_files;
            let after = purity_report(&refactored, kind, DEFAULT_BUDGET).elements;
            ensure(
                after.purely_covered >= before.purely_covered && after.at_least_one_pure >= before.at_least_one_pure,
                || format!("{} ({kind}) decreased: {before:?} -> {after:?}", file.path),
            )?;
            if after.purely_covered > before.purely_covered && after.at_least_one_pure > before.at_least_one_pure {
                strictly.insert(file.path.clone());
            }
        }
    }
    ensure(strictly.len() >= 5, || format!("only {} strict increases: {strictly:?}", strictly.len()))?;
    Ok(format!("never decreases; both metrics strictly increase on {} fixtures", strictly.len()))
}

/// Fewest contiguous fragments such that impure constituents stand alone and
/// no element sees two different pure values inside one fragment.
fn brute_force_minimum(rows: &[Vec<Signature>], n: usize) -> usize {
    let impure = |c: usize| rows.iter().any(|r| r[c] == Signature::Impure);
    let homogeneous = |a: usize, b: usize| {
        if (a..=b).any(impure) {
            return a == b;
        }
        rows.iter().all(|r| {
            let seen: BTreeSet<_> = r[a..=b].iter().filter_map(|s| s.pure_value()).collect();
            seen.len() <= 1
        })
    };
    // best[j] = fewest fragments covering the first j constituents
    let mut best = vec![usize::MAX; n + 1];
    best[0] = 0;
    for j in 1..=n {
        for i in 0..j {
            if best[i] != usize::MAX && homogeneous(i, j - 1) {
                best[j] = best[j].min(best[i] + 1);
            }
        }
    }
    best[n]
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let values = [
        Signature::NotExecuted,
        Signature::Pure(DomainValue::ThenBranch),
        Signature::Pure(DomainValue::ElseBranch),
        Signature::Impure,
    ];
    for case in 0..1000 {
        let n = rng.gen_range(1..=10);
        let k = rng.gen_range(1..=3);
        let impure_rate = rng.gen_range(0..=3);
        let rows: Vec<Vec<Signature>> = (0..k)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        if rng.gen_range(0..10) < impure_rate {
                            Signature::Impure
                        } else {
                            values[rng.gen_range(0..3)]
                        }
                    })
                    .collect()
            })
            .collect();
        let m = SignatureMatrix::from_rows(n, rows.clone());
        let got = compute_cuts("t", &m).cuts.len();
        let want = brute_force_minimum(&rows, n);
        ensure(got == want, || format!("case {case}: {got} fragments, minimum {want}, rows {rows:?}"))?;
    }
    within(start, Duration::from_secs(30))?;
    Ok("1000 instances match the exhaustive minimum".into())
}

/// Cuts of a fragment's own matrix, ignoring hook calls.
fn own_cuts(file: &ParsedFile, matrix: &SignatureMatrix, test: &str) -> usize {
    let t = file.test(test).expect("test exists");
    let keep: Vec<usize> = (0..matrix.constituents)
        .filter(|&c| !matches!(t.constituents[c], Stmt::HookCall(_)))
        .collect();
    let rows = matrix
        .rows
        .iter()
        .map(|(_, r)| keep.iter().map(|&c| r[c]).collect())
        .collect();
    compute_cuts(test, &SignatureMatrix::from_rows(keep.len(), rows)).cuts.len()
}

fn criterion_7() -> Verdict {
    let files = corpus();
    let mut fragments = 0;
    for kind in [ElementKind::If, ElementKind::Try] {
        let once = refactor_suite(&files, kind, DEFAULT_BUDGET);
        let twice = refactor_suite(&once.output_files, kind, DEFAULT_BUDGET);
        ensure(twice.split.is_empty(), || format!("{kind}: re-split {:?}", twice.split.keys()))?;
        ensure(twice.output_files == once.output_files, || format!("{kind}: output changed"))?;
        // each emitted fragment is already homogeneous on its own
        let suite = run_suite(&once.output_files, Some(kind), DEFAULT_BUDGET);
        let analysis = PurityAnalysis::new(&once.output_files, &suite, kind);
        for (key, matrix) in &analysis.tests {
            let file = once.output_files.iter().find(|f| f.path == key.file).expect("file");
            if file.test(&key.test).is_some_and(|t| t.origin_meta.is_some()) {
                fragments += 1;
                let n = own_cuts(file, matrix, &key.test);
                ensure(n <= 1, || format!("{key} ({kind}) would split into {n}"))?;
            }
        }
    }
    Ok(format!("zero additional cuts; {fragments} fragments checked"))
}

fn criterion_8() -> Verdict {
    let files = fixture("scta_unknown.tl");
    let plan = refactor_suite(&files, ElementKind::Try, DEFAULT_BUDGET);
    let report = classify_try_contracts(&files, Some(&plan.output_files), DEFAULT_BUDGET);
    let e: ElementId = "try:scta_unknown.tl:parseOr:1".parse().expect("element id");
    let before = report.before.class_of(&e);
    let after = report.after.as_ref().and_then(|a| a.class_of(&e));
    ensure(before == Some(ContractClass::Unknown), || format!("before: {before:?}"))?;
    ensure(
        matches!(after, Some(ContractClass::SourceDependent | ContractClass::SourceIndependent)),
        || format!("after: {after:?}"),
    )?;

    for file in corpus() {
        let one = std::slice::from_ref(&file);
        let refactored = refactor_suite(one, ElementKind::Try, DEFAULT_BUDGET).output_files;
        let r = classify_try_contracts(one, Some(&refactored), DEFAULT_BUDGET);
        let a = r.after.expect("after");
        ensure(a.unknown <= r.before.unknown, || {
            format!("{}: unknown {} -> {}", file.path, r.before.unknown, a.unknown)
        })?;
    }

    let imp = UnknownImprovement::new(22, 7);
    ensure(imp.delta == -15 && imp.percent_text == "68.18%", || {
        format!("22 -> 7 gave {} and {}", imp.delta, imp.percent_text)
    })?;
    Ok(format!("{before:?} -> {after:?}; #unknown never increases; 22 -> 7 = -15 (68.18%)"))
}

fn criterion_9() -> Verdict {
    let pure = format_percent(percent(539, 2254));
    ensure(pure == "23.91%", || format!("539/2254 gave {pure}"))?;
    let d = MetricDelta::new("purely_covered", 451, 1701);
    ensure(d.absolute == 1250 && d.relative_text == "277.16%", || {
        format!("451 -> 1701 gave {} and {}", d.absolute, d.relative_text)
    })?;
    Ok("23.91%, +1250 (277.16%)".into())
}

fn cli(args: &[&str]) -> (Option<i32>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_testpure"))
        .args(args)
        .env_remove("TESTPURE_BUDGET")
        .output()
        .expect("binary runs");
    (out.status.code(), out.stdout)
}

fn dir_snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable dir") {
            let p = entry.expect("entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).expect("inside").to_path_buf(), std::fs::read(&p).expect("readable")));
            }
        }
    }
    files.sort();
    files
}

fn criterion_10() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fx = fixtures();
    let fx = fx.to_str().expect("utf-8 path");
    let out = tmp.path().join("out");
    let out = out.to_str().expect("utf-8 path");
    let trace_file = tmp.path().join("trace.jsonl");
    let trace_file = trace_file.to_str().expect("utf-8 path");

    // refactor first: later commands read its output
    let refactor = ["refactor", fx, "--elements", "if", "-o", out];
    let first = cli(&refactor);
    let snapshot = dir_snapshot(Path::new(out));
    let second = cli(&refactor);
    ensure(first == second, || "refactor stdout differs".into())?;
    ensure(snapshot == dir_snapshot(Path::new(out)), || "refactor output files differ".into())?;

    let commands: Vec<Vec<&str>> = vec![
        vec!["run", fx],
        vec!["run", fx, "--format", "json"],
        vec!["trace", fx, "--elements", "try"],
        vec!["metrics", fx, "--elements", "if"],
        vec!["metrics", fx, "--elements", "if", "--compare", out, "--format", "json"],
        vec!["mutate", fx, "--against", out, "--seed", "7", "--max", "25"],
        vec!["contracts", fx, "--refactored", out],
        vec!["repair-check", fx, "--element", "if:factorial.tl:factorialLog:1"],
        vec!["refactor", fx, "--elements", "try", "-o", out, "--format", "json"],
    ];
    for args in &commands {
        let a = cli(args);
        let b = cli(args);
        ensure(a == b, || format!("`{}` differs between runs", args.join(" ")))?;
        ensure(a.0.is_some_and(|c| c <= 1), || format!("`{}` exited {:?}", args.join(" "), a.0))?;
    }
    let a = cli(&["trace", fx, "--elements", "if", "-o", trace_file]);
    let first = std::fs::read(trace_file).map_err(|e| e.to_string())?;
    let b = cli(&["trace", fx, "--elements", "if", "-o", trace_file]);
    let second = std::fs::read(trace_file).map_err(|e| e.to_string())?;
    ensure(a == b && first == second, || "trace -o differs".into())?;
    Ok(format!("{} invocations byte-identical", commands.len() + 2))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("worked cut example", criterion_1),
        ("factorial end to end", criterion_2),
        ("mid and package name fixtures", criterion_3),
        ("mutation equivalence", criterion_4),
        ("purity never decreases", criterion_5),
        ("minimal fragment count", criterion_6),
        ("idempotence", criterion_7),
        ("try contracts", criterion_8),
        ("metric arithmetic", criterion_9),
        ("CLI determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match verdict {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {reason}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
