// SPDX-License-Identifier: Apache-2.0
//! `testpure`: run, trace, split and evaluate `.tl` test suites.
//!
//! Exit codes: 0 success, 1 failing tests / non-equivalence / not ready,
//! 2 usage error, 3 internal error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use testpure::applications::{check_repair_readiness, classify_try_contracts};
use testpure::corpus::{load_paths, write_suite};
use testpure::metrics::{improvement_report, purity_report, Report};
use testpure::splitter::refactor_suite;
use testpure::testlang::{run_suite, trace_to_jsonl, ElementId, ElementKind, ParsedFile, TestStatus};
use testpure::validator::{compare_matrices, generate_mutants, kill_matrix, MutationOperator};

#[derive(Parser)]
#[command(name = "testpure", version, about = "Split impure test cases into pure fragments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `.tl` files or directories (searched recursively)
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Interpreter steps per test
    #[arg(long, env = "TESTPURE_BUDGET", default_value_t = 1_000_000)]
    budget: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    If,
    Try,
}

impl From<Kind> for ElementKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::If => ElementKind::If,
            Kind::Try => ElementKind::Try,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every test and report its status
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Record element executions as JSON Lines
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        elements: Kind,
        /// Write the trace here instead of standard output
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Split impure tests and write the refactored suite and its plan
    Refactor {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        elements: Kind,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Purity statistics, or their change against a refactored suite
    Metrics {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        elements: Kind,
        /// Directory holding the refactored suite
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Check that a refactored suite kills the same mutants
    Mutate {
        #[command(flatten)]
        common: Common,
        /// Directory holding the refactored suite
        #[arg(long)]
        against: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample at most this many mutants
        #[arg(long)]
        max: Option<usize>,
    },
    /// Classify the exception contracts of `try` elements
    Contracts {
        #[command(flatten)]
        common: Common,
        /// Directory holding the refactored suite
        #[arg(long)]
        refactored: Option<PathBuf>,
    },
    /// Whether an `if` has the tests a condition-repair tool needs
    RepairCheck {
        #[command(flatten)]
        common: Common,
        /// `if:file:function:ordinal`
        #[arg(long)]
        element: String,
    },
}

enum Failure {
    Usage(String),
    Internal(String),
}

type Outcome = Result<bool, Failure>;

fn internal(e: impl std::fmt::Display) -> Failure {
    Failure::Internal(e.to_string())
}

fn load(paths: &[PathBuf]) -> Result<Vec<ParsedFile>, Failure> {
    load_paths(paths).map_err(internal)
}

fn load_dir(dir: &Path) -> Result<Vec<ParsedFile>, Failure> {
    if !dir.is_dir() {
        return Err(Failure::Usage(format!("{} is not a directory", dir.display())));
    }
    load_paths(&[dir]).map_err(internal)
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn emit(text: &str) {
    print!("{text}");
}

fn run(common: &Common) -> Outcome {
    let files = load(&common.paths)?;
    let suite = run_suite(&files, None, common.budget);
    if common.format == Format::Json {
        emit(&json(&suite));
    } else {
        let mut out = String::new();
        let mut counts = [0usize; 4];
        for t in &suite.tests {
            let (label, slot) = match t.outcome.status {
                TestStatus::Passed => ("PASS", 0),
                TestStatus::AssertionFailed | TestStatus::UncaughtException => ("FAIL", 1),
                TestStatus::BudgetExceeded => ("HANG", 2),
                TestStatus::Skipped => ("SKIP", 3),
            };
            counts[slot] += 1;
            let _ = write!(out, "{label} {}#{}", t.file, t.test);
            if let Some(detail) = &t.outcome.failure_detail {
                let _ = write!(out, "  {detail}");
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "{} tests: {} passed, {} failed, {} hung, {} skipped",
            suite.tests.len(),
            counts[0],
            counts[1],
            counts[2],
            counts[3]
        );
        emit(&out);
    }
    Ok(suite.all_passed())
}

fn trace(common: &Common, kind: ElementKind, output: Option<&Path>) -> Outcome {
    let files = load(&common.paths)?;
    let suite = run_suite(&files, Some(kind), common.budget);
    let text = trace_to_jsonl(&suite.trace_log());
    match output {
        Some(path) => fs::write(path, text).map_err(|e| internal(format!("{}: {e}", path.display())))?,
        None => emit(&text),
    }
    Ok(true)
}

fn refactor(common: &Common, kind: ElementKind, output: &Path) -> Outcome {
    let files = load(&common.paths)?;
    let plan = refactor_suite(&files, kind, common.budget);
    write_suite(output, &plan.output_files).map_err(internal)?;
    let plan_json = plan.to_json() + "\n";
    let plan_path = output.join("plan.json");
    fs::write(&plan_path, &plan_json).map_err(|e| internal(format!("{}: {e}", plan_path.display())))?;
    if common.format == Format::Json {
        emit(&plan_json);
    } else {
        let mut out = String::new();
        for (test, fragments) in &plan.split {
            let names: Vec<&str> = fragments.iter().map(|f| f.name.as_str()).collect();
            let _ = writeln!(out, "split {test} -> {}", names.join(", "));
        }
        for (test, hoisted) in &plan.hoisted {
            for h in hoisted {
                let _ = writeln!(out, "hoist {test}: {} -> {}", h.original, h.fresh);
            }
        }
        for test in &plan.budget_exceeded {
            let _ = writeln!(out, "budget exceeded, kept {test}");
        }
        let _ = writeln!(
            out,
            "{} tests kept, {} split into {} fragments; wrote {}",
            plan.kept.len(),
            plan.split.len(),
            plan.fragment_count(),
            output.display()
        );
        emit(&out);
    }
    Ok(true)
}

fn render(report: &dyn Report, format: Format) -> String {
    match format {
        Format::Text => report.to_text(),
        Format::Json => report.to_json(),
    }
}

fn metrics(common: &Common, kind: ElementKind, compare: Option<&Path>) -> Outcome {
    let files = load(&common.paths)?;
    let before = purity_report(&files, kind, common.budget);
    match compare {
        None => emit(&render(&before, common.format)),
        Some(dir) => {
            let refactored = load_dir(dir)?;
            let after = purity_report(&refactored, kind, common.budget);
            let report = improvement_report(&before, &after).map_err(internal)?;
            emit(&render(&report, common.format));
        }
    }
    Ok(true)
}

fn mutate(common: &Common, against: &Path, seed: u64, max: Option<usize>) -> Outcome {
    let files = load(&common.paths)?;
    let refactored = load_dir(against)?;
    let mutants = generate_mutants(&files, &MutationOperator::ALL, seed, max);
    let (original, failed_original) = kill_matrix(&files, &mutants, common.budget);
    let (after, failed_after) = kill_matrix(&refactored, &mutants, common.budget);
    for (id, e) in failed_original.iter().chain(&failed_after) {
        eprintln!("skipped mutant {id}: {e}");
    }
    // a mutant that applies to one side only cannot be compared
    let mut original = original;
    let mut after = after;
    for (id, _) in failed_original.iter().chain(&failed_after) {
        original.outcomes.remove(id);
        after.outcomes.remove(id);
    }
    let report = compare_matrices(&original, &after).map_err(internal)?;
    if common.format == Format::Json {
        emit(&json(&serde_json::json!({
            "seed": seed,
            "mutants": mutants,
            "original": original,
            "refactored": after,
            "report": report,
        })));
    } else {
        emit(&format!("{} mutants (seed {seed})\n{}", mutants.len(), report.to_text()));
    }
    Ok(report.equivalent)
}

fn contracts(common: &Common, refactored: Option<&Path>) -> Outcome {
    let files = load(&common.paths)?;
    let refactored = refactored.map(load_dir).transpose()?;
    let report = classify_try_contracts(&files, refactored.as_deref(), common.budget);
    if common.format == Format::Json {
        emit(&json(&report));
    } else {
        emit(&report.to_text());
    }
    Ok(true)
}

fn repair_check(common: &Common, element: &str) -> Outcome {
    let e: ElementId = element
        .parse()
        .map_err(|e| Failure::Usage(format!("bad element `{element}`: {e}")))?;
    let files = load(&common.paths)?;
    let r = check_repair_readiness(&files, &e, common.budget).map_err(|e| Failure::Usage(e.to_string()))?;
    if common.format == Format::Json {
        emit(&json(&r));
    } else {
        emit(&r.to_text());
    }
    Ok(r.ready)
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Run { common }
            | Command::Trace { common, .. }
            | Command::Refactor { common, .. }
            | Command::Metrics { common, .. }
            | Command::Mutate { common, .. }
            | Command::Contracts { common, .. }
            | Command::RepairCheck { common, .. } => common,
        }
    }
}

fn dispatch(cli: Cli) -> Outcome {
    if cli.command.common().budget == 0 {
        return Err(Failure::Usage("--budget must be positive".into()));
    }
    match &cli.command {
        Command::Run { common } => run(common),
        Command::Trace {
            common,
            elements,
            output,
        } => trace(common, (*elements).into(), output.as_deref()),
        Command::Refactor {
            common,
            elements,
            output,
        } => refactor(common, (*elements).into(), output),
        Command::Metrics {
            common,
            elements,
            compare,
        } => metrics(common, (*elements).into(), compare.as_deref()),
        Command::Mutate {
            common,
            against,
            seed,
            max,
        } => mutate(common, against, *seed, *max),
        Command::Contracts { common, refactored } => contracts(common, refactored.as_deref()),
        Command::RepairCheck { common, element } => repair_check(common, element),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
