// SPDX-License-Identifier: Apache-2.0
//! Deterministic tree-walking interpreter with per-element tracing.
//!
//! Every statement executed and every expression node evaluated costs one
//! step. Hook-call statements cost nothing by themselves (only the hook body
//! is charged) so that an explicit `setUp();` costs exactly what the automatic
//! hook invocation does.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;

/// Maximum nesting of user function calls before a `stack overflow`
/// exception is raised.
pub const MAX_CALL_DEPTH: usize = 200;

/// Message carried by exceptions raised through [`InjectionConfig`].
pub const INJECTED_EXCEPTION: &str = "injected exception";

/// One outcome of one execution of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainValue {
    ThenBranch,
    ElseBranch,
    NoException,
    ExceptionCaught,
    ExceptionNotCaught,
}

impl DomainValue {
    pub fn kind(self) -> ElementKind {
        match self {
            DomainValue::ThenBranch | DomainValue::ElseBranch => ElementKind::If,
            _ => ElementKind::Try,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DomainValue::ThenBranch => "then-branch",
            DomainValue::ElseBranch => "else-branch",
            DomainValue::NoException => "no-exception",
            DomainValue::ExceptionCaught => "exception-caught",
            DomainValue::ExceptionNotCaught => "exception-not-caught",
        }
    }

    pub fn domain(kind: ElementKind) -> &'static [DomainValue] {
        match kind {
            ElementKind::If => &[DomainValue::ThenBranch, DomainValue::ElseBranch],
            ElementKind::Try => &[
                DomainValue::NoException,
                DomainValue::ExceptionCaught,
                DomainValue::ExceptionNotCaught,
            ],
        }
    }
}

impl fmt::Display for DomainValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub test: String,
    /// 1-based constituent index; 0 for events raised while a hook runs.
    pub constituent: usize,
    pub element: ElementId,
    pub value: DomainValue,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestStatus {
    Passed,
    AssertionFailed,
    UncaughtException,
    BudgetExceeded,
    /// An earlier fragment of the same origin did not pass.
    Skipped,
}

impl TestStatus {
    pub fn is_failure(self) -> bool {
        matches!(self, TestStatus::AssertionFailed | TestStatus::UncaughtException)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub status: TestStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_detail: Option<String>,
    pub assert_count: u64,
}

impl TestOutcome {
    pub fn skipped() -> Self {
        TestOutcome {
            status: TestStatus::Skipped,
            failure_detail: None,
            assert_count: 0,
        }
    }
}

/// Raise a synthetic exception at the start of every dynamic entry into the
/// body of `element`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectionConfig {
    pub element: ElementId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Str(String),
    Null,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => f.write_str(s),
            Value::Null => f.write_str("null"),
        }
    }
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Str(_) => "string",
            Value::Null => "null",
        }
    }

    /// Human-readable rendering used in assertion messages.
    fn debug_repr(&self) -> String {
        match self {
            Value::Str(s) => format!("{s:?}"),
            other => other.to_string(),
        }
    }
}

enum Signal {
    Throw(Value),
    AssertFail(String),
    Budget,
}

enum Flow {
    Next,
    Return(Value),
}

type Exec<T> = Result<T, Signal>;

fn throw<T>(message: impl Into<String>) -> Exec<T> {
    Err(Signal::Throw(Value::Str(message.into())))
}

struct Frame<'f> {
    function: Option<&'f str>,
    scopes: Vec<HashMap<String, Value>>,
}

/// Execution options shared by every test of a run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub tracking: Option<ElementKind>,
    pub budget: u64,
    pub injection: Option<InjectionConfig>,
}

/// Result of running one test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestRun {
    pub name: String,
    pub outcome: TestOutcome,
    pub events: Vec<TraceEvent>,
}

struct Machine<'f> {
    file: &'f ParsedFile,
    functions: HashMap<&'f str, &'f FunctionDecl>,
    globals: HashMap<String, Value>,
    frames: Vec<Frame<'f>>,
    remaining: u64,
    budget: u64,
    tracking: Option<ElementKind>,
    injection: Option<&'f ElementId>,
    injection_active: bool,
    test_name: String,
    constituent: usize,
    hook_depth: usize,
    seq: u64,
    asserts: u64,
    events: Vec<TraceEvent>,
}

/// Runs `tests` in one shared session: file bindings are initialised once,
/// and each test after a non-passing one is reported as skipped. A plain test
/// is a session of one; the fragments of an origin share a session.
///
/// With `injection_target = Some(k)` the injection in `opts` is active only
/// while `tests[k]` runs and the session stops after it.
pub(crate) fn run_session<'f>(
    file: &'f ParsedFile,
    tests: &[&'f TestCase],
    opts: &'f RunOptions,
    injection_target: Option<usize>,
) -> Vec<TestRun> {
    let mut m = Machine {
        file,
        functions: file.functions.iter().map(|f| (f.name.as_str(), f)).collect(),
        globals: HashMap::new(),
        frames: Vec::new(),
        remaining: opts.budget,
        budget: opts.budget,
        tracking: opts.tracking,
        injection: opts.injection.as_ref().map(|i| &i.element),
        injection_active: false,
        test_name: String::new(),
        constituent: 0,
        hook_depth: 0,
        seq: 0,
        asserts: 0,
        events: Vec::new(),
    };

    let mut init_failure = m.init_globals().err();
    let mut runs = Vec::with_capacity(tests.len());
    let mut stopped = false;
    for (k, test) in tests.iter().enumerate() {
        if stopped {
            runs.push(TestRun {
                name: test.name.clone(),
                outcome: TestOutcome::skipped(),
                events: Vec::new(),
            });
            continue;
        }
        m.test_name = test.name.clone();
        m.seq = 0;
        m.asserts = 0;
        m.constituent = 0;
        m.injection_active = m.injection.is_some() && injection_target.is_none_or(|t| t == k);
        let result = match init_failure.take() {
            Some(signal) => Err(signal),
            None => m.run_test(test),
        };
        let outcome = m.outcome(result);
        stopped = outcome.status != TestStatus::Passed || injection_target == Some(k);
        runs.push(TestRun {
            name: test.name.clone(),
            outcome,
            events: std::mem::take(&mut m.events),
        });
    }
    runs
}

impl<'f> Machine<'f> {
    fn init_globals(&mut self) -> Exec<()> {
        self.frames.push(Frame {
            function: None,
            scopes: vec![HashMap::new()],
        });
        for b in &self.file.file_bindings {
            let value = match &b.init {
                Some(e) => self.eval(e)?,
                None => Value::Null,
            };
            self.globals.insert(b.name.clone(), value);
        }
        self.frames.pop();
        Ok(())
    }

    fn outcome(&self, result: Exec<()>) -> TestOutcome {
        let (status, failure_detail) = match result {
            Ok(()) => (TestStatus::Passed, None),
            Err(Signal::AssertFail(msg)) => (TestStatus::AssertionFailed, Some(msg)),
            Err(Signal::Throw(v)) => (
                TestStatus::UncaughtException,
                Some(format!("uncaught exception: {v}")),
            ),
            Err(Signal::Budget) => (
                TestStatus::BudgetExceeded,
                Some(format!("step budget of {} exhausted", self.budget)),
            ),
        };
        TestOutcome {
            status,
            failure_detail,
            assert_count: self.asserts,
        }
    }

    fn run_test(&mut self, test: &'f TestCase) -> Exec<()> {
        let automatic_hooks = test.origin_meta.is_none();
        if automatic_hooks {
            self.run_hook(Hook::SetUp, true)?;
        }
        self.frames.push(Frame {
            function: None,
            scopes: vec![HashMap::new()],
        });
        let mut result = Ok(());
        for (i, stmt) in test.constituents.iter().enumerate() {
            self.constituent = i + 1;
            if let Err(signal) = self.exec(stmt) {
                result = Err(signal);
                break;
            }
        }
        self.frames.pop();
        self.constituent = 0;
        result?;
        if automatic_hooks {
            self.run_hook(Hook::TearDown, true)?;
        }
        Ok(())
    }

    fn run_hook(&mut self, hook: Hook, optional: bool) -> Exec<()> {
        let file = self.file;
        let block = match hook {
            Hook::SetUp => file.before_hook.as_ref(),
            Hook::TearDown => file.after_hook.as_ref(),
        };
        let Some(block) = block else {
            return if optional {
                Ok(())
            } else {
                throw(format!("no {} hook declared", hook.keyword()))
            };
        };
        self.hook_depth += 1;
        self.frames.push(Frame {
            function: None,
            scopes: vec![HashMap::new()],
        });
        let result = self.exec_block(block);
        self.frames.pop();
        self.hook_depth -= 1;
        result.map(|_| ())
    }

    fn tick(&mut self) -> Exec<()> {
        if self.remaining == 0 {
            return Err(Signal::Budget);
        }
        self.remaining -= 1;
        Ok(())
    }

    fn emit(&mut self, kind: ElementKind, ordinal: Option<u32>, value: DomainValue) {
        if self.tracking != Some(kind) {
            return;
        }
        let (Some(ordinal), Some(function)) = (ordinal, self.current_function()) else {
            return;
        };
        self.seq += 1;
        let constituent = if self.hook_depth > 0 { 0 } else { self.constituent };
        self.events.push(TraceEvent {
            test: self.test_name.clone(),
            constituent,
            element: ElementId::new(kind, &self.file.path, function, ordinal),
            value,
            seq: self.seq,
        });
    }

    fn current_function(&self) -> Option<&'f str> {
        self.frames.last().and_then(|f| f.function)
    }

    fn is_injected(&self, ordinal: Option<u32>) -> bool {
        if !self.injection_active {
            return false;
        }
        match (self.injection, ordinal, self.current_function()) {
            (Some(target), Some(ordinal), Some(function)) => {
                target.kind == ElementKind::Try
                    && target.ordinal == ordinal
                    && target.function == function
                    && target.file == self.file.path
            }
            _ => false,
        }
    }

    fn frame(&mut self) -> &mut Frame<'f> {
        self.frames.last_mut().expect("interpreter frame")
    }

    fn lookup(&self, name: &str) -> Exec<Value> {
        let frame = self.frames.last().expect("interpreter frame");
        for scope in frame.scopes.iter().rev() {
            if let Some(v) = scope.get(name) {
                return Ok(v.clone());
            }
        }
        match self.globals.get(name) {
            Some(v) => Ok(v.clone()),
            None => throw(format!("undefined variable `{name}`")),
        }
    }

    fn assign(&mut self, name: &str, value: Value) -> Exec<()> {
        let frame = self.frames.last_mut().expect("interpreter frame");
        for scope in frame.scopes.iter_mut().rev() {
            if let Some(slot) = scope.get_mut(name) {
                *slot = value;
                return Ok(());
            }
        }
        match self.globals.get_mut(name) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => throw(format!("assignment to undefined variable `{name}`")),
        }
    }

    fn exec_block(&mut self, block: &'f [Stmt]) -> Exec<Flow> {
        self.frame().scopes.push(HashMap::new());
        let mut result = Ok(Flow::Next);
        for stmt in block {
            match self.exec(stmt) {
                Ok(Flow::Next) => {}
                other => {
                    result = other;
                    break;
                }
            }
        }
        self.frame().scopes.pop();
        result
    }

    fn condition(&mut self, cond: &'f Expr) -> Exec<bool> {
        match self.eval(cond)? {
            Value::Bool(b) => Ok(b),
            other => throw(format!("condition is a {}, not a bool", other.type_name())),
        }
    }

    fn exec(&mut self, stmt: &'f Stmt) -> Exec<Flow> {
        if let Stmt::HookCall(hook) = stmt {
            self.run_hook(*hook, false)?;
            return Ok(Flow::Next);
        }
        self.tick()?;
        match stmt {
            Stmt::Let { name, init } => {
                let value = match init {
                    Some(e) => self.eval(e)?,
                    None => {
                        // implicit `null`, charged like the literal
                        self.tick()?;
                        Value::Null
                    }
                };
                let scope = self.frame().scopes.last_mut().expect("scope");
                scope.insert(name.clone(), value);
            }
            Stmt::Assign { name, value } => {
                let v = self.eval(value)?;
                self.assign(name, v)?;
            }
            Stmt::If {
                ordinal,
                cond,
                then_block,
                else_block,
            } => {
                if self.condition(cond)? {
                    self.emit(ElementKind::If, *ordinal, DomainValue::ThenBranch);
                    return self.exec_block(then_block);
                }
                self.emit(ElementKind::If, *ordinal, DomainValue::ElseBranch);
                if let Some(b) = else_block {
                    return self.exec_block(b);
                }
            }
            Stmt::While { cond, body } => {
                while self.condition(cond)? {
                    if let Flow::Return(v) = self.exec_block(body)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            Stmt::Try {
                ordinal,
                body,
                catch_var,
                handler,
            } => return self.exec_try(*ordinal, body, catch_var, handler),
            Stmt::Throw(e) => {
                let v = self.eval(e)?;
                return Err(Signal::Throw(v));
            }
            Stmt::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e)?,
                    None => Value::Null,
                };
                return Ok(Flow::Return(v));
            }
            Stmt::Expr(e) => {
                self.eval(e)?;
            }
            Stmt::Assert(e) => {
                let v = self.eval(e)?;
                self.asserts += 1;
                match v {
                    Value::Bool(true) => {}
                    Value::Bool(false) => return Err(Signal::AssertFail("assertion failed".into())),
                    other => {
                        return Err(Signal::AssertFail(format!(
                            "assertion on a {} value",
                            other.type_name()
                        )))
                    }
                }
            }
            Stmt::AssertEquals(expected, actual) => {
                let a = self.eval(expected)?;
                let b = self.eval(actual)?;
                self.asserts += 1;
                if a != b {
                    return Err(Signal::AssertFail(format!(
                        "expected {} but was {}",
                        a.debug_repr(),
                        b.debug_repr()
                    )));
                }
            }
            Stmt::Fail(e) => {
                let v = self.eval(e)?;
                self.asserts += 1;
                return Err(Signal::AssertFail(v.to_string()));
            }
            Stmt::HookCall(_) => unreachable!("handled above"),
        }
        Ok(Flow::Next)
    }

    fn exec_try(
        &mut self,
        ordinal: Option<u32>,
        body: &'f [Stmt],
        catch_var: &str,
        handler: &'f [Stmt],
    ) -> Exec<Flow> {
        let body_result = if self.is_injected(ordinal) {
            Err(Signal::Throw(Value::Str(INJECTED_EXCEPTION.into())))
        } else {
            self.exec_block(body)
        };
        let exception = match body_result {
            Ok(flow) => {
                self.emit(ElementKind::Try, ordinal, DomainValue::NoException);
                return Ok(flow);
            }
            Err(Signal::Throw(v)) => v,
            // assertion failures and budget exhaustion are not catchable
            Err(other) => return Err(other),
        };
        self.frame()
            .scopes
            .push(HashMap::from([(catch_var.to_string(), exception)]));
        let handled = self.exec_block(handler);
        self.frame().scopes.pop();
        match handled {
            Ok(flow) => {
                self.emit(ElementKind::Try, ordinal, DomainValue::ExceptionCaught);
                Ok(flow)
            }
            Err(Signal::Throw(v)) => {
                self.emit(ElementKind::Try, ordinal, DomainValue::ExceptionNotCaught);
                Err(Signal::Throw(v))
            }
            Err(other) => Err(other),
        }
    }

    fn eval(&mut self, e: &'f Expr) -> Exec<Value> {
        self.tick()?;
        match e {
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Str(s) => Ok(Value::Str(s.clone())),
            Expr::Null => Ok(Value::Null),
            Expr::Var(name) => self.lookup(name),
            Expr::Unary { op, operand } => {
                let v = self.eval(operand)?;
                match (op, v) {
                    (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnaryOp::Neg, Value::Int(i)) => match i.checked_neg() {
                        Some(r) => Ok(Value::Int(r)),
                        None => throw("integer overflow"),
                    },
                    (op, v) => throw(format!("bad operand {} for unary {op:?}", v.type_name())),
                }
            }
            Expr::Binary { op, lhs, rhs } => match op {
                BinaryOp::And | BinaryOp::Or => {
                    let l = self.condition(lhs)?;
                    if (*op == BinaryOp::And && !l) || (*op == BinaryOp::Or && l) {
                        return Ok(Value::Bool(l));
                    }
                    Ok(Value::Bool(self.condition(rhs)?))
                }
                _ => {
                    let l = self.eval(lhs)?;
                    let r = self.eval(rhs)?;
                    binary(*op, l, r)
                }
            },
            Expr::Call { name, args } => {
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.eval(a)?);
                }
                if let Some(func) = self.functions.get(name.as_str()).copied() {
                    self.call(func, values)
                } else if BUILTINS.contains(&name.as_str()) {
                    builtin(name, values)
                } else {
                    throw(format!("undefined function `{name}`"))
                }
            }
        }
    }

    fn call(&mut self, func: &'f FunctionDecl, args: Vec<Value>) -> Exec<Value> {
        if args.len() != func.params.len() {
            return throw(format!(
                "`{}` expects {} arguments, got {}",
                func.name,
                func.params.len(),
                args.len()
            ));
        }
        if self.frames.len() > MAX_CALL_DEPTH {
            return throw("stack overflow");
        }
        let scope: HashMap<String, Value> = func.params.iter().cloned().zip(args).collect();
        self.frames.push(Frame {
            function: Some(func.name.as_str()),
            scopes: vec![scope],
        });
        let result = self.exec_block(&func.body);
        self.frames.pop();
        match result? {
            Flow::Return(v) => Ok(v),
            Flow::Next => Ok(Value::Null),
        }
    }
}

fn binary(op: BinaryOp, l: Value, r: Value) -> Exec<Value> {
    use BinaryOp::*;
    match (op, l, r) {
        (Eq, a, b) => Ok(Value::Bool(a == b)),
        (Ne, a, b) => Ok(Value::Bool(a != b)),
        (Add, Value::Str(a), b) => Ok(Value::Str(format!("{a}{b}"))),
        (Add, a, Value::Str(b)) => Ok(Value::Str(format!("{a}{b}"))),
        (op, Value::Int(a), Value::Int(b)) => {
            let checked = match op {
                Add => a.checked_add(b),
                Sub => a.checked_sub(b),
                Mul => a.checked_mul(b),
                Div | Rem if b == 0 => return throw("division by zero"),
                Div => a.checked_div(b),
                Rem => a.checked_rem(b),
                Lt => return Ok(Value::Bool(a < b)),
                Le => return Ok(Value::Bool(a <= b)),
                Gt => return Ok(Value::Bool(a > b)),
                Ge => return Ok(Value::Bool(a >= b)),
                Eq | Ne | And | Or => unreachable!(),
            };
            match checked {
                Some(v) => Ok(Value::Int(v)),
                None => throw("integer overflow"),
            }
        }
        (op @ (Lt | Le | Gt | Ge), Value::Str(a), Value::Str(b)) => Ok(Value::Bool(match op {
            Lt => a < b,
            Le => a <= b,
            Gt => a > b,
            _ => a >= b,
        })),
        (op, a, b) => throw(format!(
            "unsupported operands {} {} {}",
            a.type_name(),
            op.symbol(),
            b.type_name()
        )),
    }
}

fn builtin(name: &str, args: Vec<Value>) -> Exec<Value> {
    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }
    let index = |v: i64, len: usize| -> Option<usize> {
        usize::try_from(v).ok().filter(|i| *i <= len)
    };
    match (name, args.as_slice()) {
        ("len", [Value::Str(s)]) => Ok(Value::Int(s.chars().count() as i64)),
        ("to_string", [v]) => Ok(Value::Str(v.to_string())),
        ("char_at", [Value::Str(s), Value::Int(i)]) => {
            let cs = chars(s);
            match index(*i, cs.len()).filter(|i| *i < cs.len()) {
                Some(i) => Ok(Value::Str(cs[i].to_string())),
                None => throw(format!("index {i} out of range")),
            }
        }
        ("substring", [Value::Str(s), Value::Int(from), Value::Int(to)]) => {
            let cs = chars(s);
            match (index(*from, cs.len()), index(*to, cs.len())) {
                (Some(a), Some(b)) if a <= b => Ok(Value::Str(cs[a..b].iter().collect())),
                _ => throw(format!("substring range {from}..{to} out of range")),
            }
        }
        ("index_of" | "last_index_of", [Value::Str(s), Value::Str(needle)]) => {
            let found = if name == "index_of" {
                s.find(needle.as_str())
            } else {
                s.rfind(needle.as_str())
            };
            Ok(Value::Int(match found {
                Some(byte) => s[..byte].chars().count() as i64,
                None => -1,
            }))
        }
        (_, args) => throw(format!(
            "bad arguments to `{name}`: ({})",
            args.iter().map(|a| a.type_name()).collect::<Vec<_>>().join(", ")
        )),
    }
}
