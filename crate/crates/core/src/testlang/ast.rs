// SPDX-License-Identifier: Apache-2.0
//! Syntax tree of the test language.

use std::fmt;

use serde::{Deserialize, Serialize};

/// The kinds of program elements whose execution is tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    If,
    Try,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::If => "if",
            ElementKind::Try => "try",
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ElementKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "if" => Ok(ElementKind::If),
            "try" => Ok(ElementKind::Try),
            other => Err(format!("unknown element kind `{other}` (expected `if` or `try`)")),
        }
    }
}

/// Identity of a tracked `if`/`try` statement inside a function body.
///
/// The ordinal counts elements of the same kind in source order within the
/// function, starting at 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ElementId {
    pub kind: ElementKind,
    pub file: String,
    pub function: String,
    pub ordinal: u32,
}

impl ElementId {
    pub fn new(kind: ElementKind, file: &str, function: &str, ordinal: u32) -> Self {
        ElementId {
            kind,
            file: file.to_string(),
            function: function.to_string(),
            ordinal,
        }
    }
}

/// Renders as `kind:file:function:ordinal`.
impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.kind, self.file, self.function, self.ordinal)
    }
}

impl std::str::FromStr for ElementId {
    type Err = String;

    /// Parses `kind:file:function:ordinal`. The file part may itself contain
    /// colons; kind is the first field and function/ordinal the last two.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("malformed element address `{s}`"))?;
        let mut tail = rest.rsplitn(3, ':');
        let ordinal = tail.next();
        let function = tail.next();
        let file = tail.next();
        match (file, function, ordinal) {
            (Some(file), Some(function), Some(ordinal)) if !file.is_empty() && !function.is_empty() => {
                let ordinal: u32 = ordinal
                    .parse()
                    .map_err(|_| format!("bad ordinal `{ordinal}` in `{s}`"))?;
                if ordinal == 0 {
                    return Err(format!("ordinals start at 1 in `{s}`"));
                }
                Ok(ElementId::new(kind.parse()?, file, function, ordinal))
            }
            _ => Err(format!("malformed element address `{s}` (expected kind:file:function:ordinal)")),
        }
    }
}

/// Origin metadata carried by a test produced by splitting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentMeta {
    pub origin: String,
    pub order: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedFile {
    pub path: String,
    pub file_bindings: Vec<Binding>,
    pub before_hook: Option<Block>,
    pub after_hook: Option<Block>,
    pub functions: Vec<FunctionDecl>,
    pub tests: Vec<TestCase>,
}

/// A file-scope variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub name: String,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<String>,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub name: String,
    /// Top-level statements; constituent `i` (1-based) is `constituents[i - 1]`.
    pub constituents: Vec<Stmt>,
    pub origin_meta: Option<FragmentMeta>,
}

pub type Block = Vec<Stmt>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hook {
    SetUp,
    TearDown,
}

impl Hook {
    pub fn keyword(self) -> &'static str {
        match self {
            Hook::SetUp => "setUp",
            Hook::TearDown => "tearDown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Let {
        name: String,
        init: Option<Expr>,
    },
    Assign {
        name: String,
        value: Expr,
    },
    If {
        /// Per-kind ordinal inside a function body; `None` in test code and hooks.
        ordinal: Option<u32>,
        cond: Expr,
        then_block: Block,
        else_block: Option<Block>,
    },
    While {
        cond: Expr,
        body: Block,
    },
    Try {
        ordinal: Option<u32>,
        body: Block,
        catch_var: String,
        handler: Block,
    },
    Throw(Expr),
    Return(Option<Expr>),
    Expr(Expr),
    Assert(Expr),
    AssertEquals(Expr, Expr),
    Fail(Expr),
    /// Explicit invocation of the file's `setUp`/`tearDown` block.
    HookCall(Hook),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 6,
        }
    }

    pub fn is_relational(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge
        )
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Str(String),
    Null,
    Var(String),
    Call { name: String, args: Vec<Expr> },
    Binary { op: BinaryOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Unary { op: UnaryOp, operand: Box<Expr> },
}

/// Functions provided by the interpreter; user functions may not reuse these names.
pub const BUILTINS: &[&str] = &[
    "len",
    "substring",
    "char_at",
    "index_of",
    "last_index_of",
    "to_string",
];

impl ParsedFile {
    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn test(&self, name: &str) -> Option<&TestCase> {
        self.tests.iter().find(|t| t.name == name)
    }

    /// All tracked elements of the file in source order (function order, then
    /// preorder within each function body).
    pub fn elements(&self) -> Vec<ElementId> {
        let mut out = Vec::new();
        for func in &self.functions {
            collect_elements(&func.body, &mut |kind, ordinal| {
                out.push(ElementId::new(kind, &self.path, &func.name, ordinal));
            });
        }
        out
    }

    pub fn elements_of(&self, kind: ElementKind) -> Vec<ElementId> {
        self.elements().into_iter().filter(|e| e.kind == kind).collect()
    }

    /// Tests sharing `origin`, sorted by fragment order.
    pub fn fragments_of(&self, origin: &str) -> Vec<&TestCase> {
        let mut group: Vec<&TestCase> = self
            .tests
            .iter()
            .filter(|t| t.origin_meta.as_ref().is_some_and(|m| m.origin == origin))
            .collect();
        group.sort_by_key(|t| t.origin_meta.as_ref().map(|m| m.order));
        group
    }
}

fn collect_elements(block: &[Stmt], visit: &mut impl FnMut(ElementKind, u32)) {
    for stmt in block {
        match stmt {
            Stmt::If {
                ordinal,
                then_block,
                else_block,
                ..
            } => {
                if let Some(o) = ordinal {
                    visit(ElementKind::If, *o);
                }
                collect_elements(then_block, visit);
                if let Some(b) = else_block {
                    collect_elements(b, visit);
                }
            }
            Stmt::Try {
                ordinal,
                body,
                handler,
                ..
            } => {
                if let Some(o) = ordinal {
                    visit(ElementKind::Try, *o);
                }
                collect_elements(body, visit);
                collect_elements(handler, visit);
            }
            Stmt::While { body, .. } => collect_elements(body, visit),
            _ => {}
        }
    }
}

/// Assigns per-kind ordinals to every `if`/`try` in a function body, in preorder.
pub(crate) fn number_elements(body: &mut [Stmt]) {
    fn walk(block: &mut [Stmt], next_if: &mut u32, next_try: &mut u32) {
        for stmt in block {
            match stmt {
                Stmt::If {
                    ordinal,
                    then_block,
                    else_block,
                    ..
                } => {
                    *next_if += 1;
                    *ordinal = Some(*next_if);
                    walk(then_block, next_if, next_try);
                    if let Some(b) = else_block {
                        walk(b, next_if, next_try);
                    }
                }
                Stmt::Try {
                    ordinal,
                    body,
                    handler,
                    ..
                } => {
                    *next_try += 1;
                    *ordinal = Some(*next_try);
                    walk(body, next_if, next_try);
                    walk(handler, next_if, next_try);
                }
                Stmt::While { body, .. } => walk(body, next_if, next_try),
                _ => {}
            }
        }
    }
    let (mut i, mut t) = (0, 0);
    walk(body, &mut i, &mut t);
}
