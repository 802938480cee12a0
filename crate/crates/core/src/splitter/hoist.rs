// SPDX-License-Identifier: Apache-2.0
//! Promotes test-local variables that cross fragment boundaries to file
//! scope.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::cuts::Fragment;
use crate::testlang::{Expr, ParsedFile, Stmt, TestCase, BUILTINS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hoist {
    pub original: String,
    pub fresh: String,
}

/// Rewrites `test`'s constituents so that every top-level `let` whose
/// binding is used from another fragment becomes an assignment to a fresh
/// file-scope variable `<origin>__<var>`. Returns one statement list per
/// fragment plus the hoists, in declaration order. `taken` holds every
/// identifier already in use in the file and receives the fresh names.
pub fn hoist_shared_variables(
    test: &TestCase,
    fragments: &[Fragment],
    taken: &mut BTreeSet<String>,
) -> (Vec<Vec<Stmt>>, Vec<Hoist>) {
    let fragment_of = |c: usize| {
        fragments
            .iter()
            .position(|f| f.contains(c))
            .expect("fragments cover every constituent")
    };

    let mut body = test.constituents.clone();
    let mut scan = Resolver::default();
    for (i, stmt) in body.iter_mut().enumerate() {
        scan.fragment = fragment_of(i + 1);
        scan.stmt(stmt);
    }

    let mut renames = HashMap::new();
    let mut hoists = Vec::new();
    for (id, binding) in scan.bindings.iter().enumerate() {
        if binding.uses.iter().any(|f| *f != binding.decl_fragment) {
            let fresh = fresh_name(&format!("{}__{}", test.name, binding.name), taken);
            hoists.push(Hoist {
                original: binding.name.clone(),
                fresh: fresh.clone(),
            });
            renames.insert(id, fresh);
        }
    }

    if !renames.is_empty() {
        let mut rewrite = Resolver {
            renames,
            ..Resolver::default()
        };
        for stmt in body.iter_mut() {
            rewrite.stmt(stmt);
        }
    }

    let mut out = Vec::with_capacity(fragments.len());
    let mut rest = body.into_iter();
    for f in fragments {
        out.push(rest.by_ref().take(f.len()).collect());
    }
    (out, hoists)
}

pub(crate) fn fresh_name(base: &str, taken: &mut BTreeSet<String>) -> String {
    let mut candidate = base.to_string();
    let mut k = 2;
    while taken.contains(&candidate) {
        candidate = format!("{base}_{k}");
        k += 1;
    }
    taken.insert(candidate.clone());
    candidate
}

/// Every identifier appearing anywhere in `file`, plus reserved names.
pub(crate) fn identifiers(file: &ParsedFile) -> BTreeSet<String> {
    fn expr(e: &Expr, out: &mut BTreeSet<String>) {
        match e {
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Call { name, args } => {
                out.insert(name.clone());
                args.iter().for_each(|a| expr(a, out));
            }
            Expr::Binary { lhs, rhs, .. } => {
                expr(lhs, out);
                expr(rhs, out);
            }
            Expr::Unary { operand, .. } => expr(operand, out),
            _ => {}
        }
    }
    fn block(b: &[Stmt], out: &mut BTreeSet<String>) {
        for s in b {
            match s {
                Stmt::Let { name, init } => {
                    out.insert(name.clone());
                    if let Some(e) = init {
                        expr(e, out);
                    }
                }
                Stmt::Assign { name, value } => {
                    out.insert(name.clone());
                    expr(value, out);
                }
                Stmt::If {
                    cond,
                    then_block,
                    else_block,
                    ..
                } => {
                    expr(cond, out);
                    block(then_block, out);
                    if let Some(b) = else_block {
                        block(b, out);
                    }
                }
                Stmt::While { cond, body } => {
                    expr(cond, out);
                    block(body, out);
                }
                Stmt::Try {
                    body,
                    catch_var,
                    handler,
                    ..
                } => {
                    out.insert(catch_var.clone());
                    block(body, out);
                    block(handler, out);
                }
                Stmt::Throw(e) | Stmt::Expr(e) | Stmt::Assert(e) | Stmt::Fail(e) => expr(e, out),
                Stmt::Return(e) => {
                    if let Some(e) = e {
                        expr(e, out);
                    }
                }
                Stmt::AssertEquals(a, b) => {
                    expr(a, out);
                    expr(b, out);
                }
                Stmt::HookCall(_) => {}
            }
        }
    }
    let mut out: BTreeSet<String> = BUILTINS.iter().map(|s| s.to_string()).collect();
    for b in &file.file_bindings {
        out.insert(b.name.clone());
        if let Some(e) = &b.init {
            expr(e, &mut out);
        }
    }
    for f in &file.functions {
        out.insert(f.name.clone());
        out.extend(f.params.iter().cloned());
        block(&f.body, &mut out);
    }
    for hook in [&file.before_hook, &file.after_hook].into_iter().flatten() {
        block(hook, &mut out);
    }
    for t in &file.tests {
        out.insert(t.name.clone());
        block(&t.constituents, &mut out);
    }
    out
}

struct TopBinding {
    name: String,
    decl_fragment: usize,
    uses: Vec<usize>,
}

/// Walks test statements with the same scoping rules as the interpreter.
/// Without renames it records top-level bindings and the fragments using
/// them; with renames it rewrites the hoisted bindings.
#[derive(Default)]
struct Resolver {
    fragment: usize,
    depth: usize,
    top: HashMap<String, usize>,
    nested: Vec<HashSet<String>>,
    bindings: Vec<TopBinding>,
    renames: HashMap<usize, String>,
}

impl Resolver {
    fn resolve(&mut self, name: &mut String) {
        if self.nested.iter().any(|s| s.contains(name.as_str())) {
            return;
        }
        let Some(&id) = self.top.get(name.as_str()) else {
            return;
        };
        if let Some(fresh) = self.renames.get(&id) {
            *name = fresh.clone();
        } else if let Some(b) = self.bindings.get_mut(id) {
            b.uses.push(self.fragment);
        }
    }

    fn expr(&mut self, e: &mut Expr) {
        match e {
            Expr::Var(name) => self.resolve(name),
            Expr::Call { args, .. } => args.iter_mut().for_each(|a| self.expr(a)),
            Expr::Binary { lhs, rhs, .. } => {
                self.expr(lhs);
                self.expr(rhs);
            }
            Expr::Unary { operand, .. } => self.expr(operand),
            _ => {}
        }
    }

    fn block(&mut self, block: &mut [Stmt], extra: Option<&str>) {
        let mut scope = HashSet::new();
        if let Some(v) = extra {
            scope.insert(v.to_string());
        }
        self.nested.push(scope);
        self.depth += 1;
        for s in block {
            self.stmt(s);
        }
        self.depth -= 1;
        self.nested.pop();
    }

    fn stmt(&mut self, stmt: &mut Stmt) {
        match stmt {
            Stmt::Let { name, init } => {
                if let Some(e) = init.as_mut() {
                    self.expr(e);
                }
                if self.depth > 0 {
                    self.nested.last_mut().expect("scope").insert(name.clone());
                    return;
                }
                // ids follow declaration order, so both passes agree on them
                self.bindings.push(TopBinding {
                    name: name.clone(),
                    decl_fragment: self.fragment,
                    uses: Vec::new(),
                });
                let id = self.bindings.len() - 1;
                self.top.insert(name.clone(), id);
                if let Some(fresh) = self.renames.get(&id) {
                    let value = init.take().unwrap_or(Expr::Null);
                    *stmt = Stmt::Assign {
                        name: fresh.clone(),
                        value,
                    };
                }
            }
            Stmt::Assign { name, value } => {
                self.expr(value);
                self.resolve(name);
            }
            Stmt::If {
                cond,
                then_block,
                else_block,
                ..
            } => {
                self.expr(cond);
                self.block(then_block, None);
                if let Some(b) = else_block {
                    self.block(b, None);
                }
            }
            Stmt::While { cond, body } => {
                self.expr(cond);
                self.block(body, None);
            }
            Stmt::Try {
                body,
                catch_var,
                handler,
                ..
            } => {
                self.block(body, None);
                let var = catch_var.clone();
                self.block(handler, Some(&var));
            }
            Stmt::Throw(e) | Stmt::Expr(e) | Stmt::Assert(e) | Stmt::Fail(e) => self.expr(e),
            Stmt::Return(e) => {
                if let Some(e) = e {
                    self.expr(e);
                }
            }
            Stmt::AssertEquals(a, b) => {
                self.expr(a);
                self.expr(b);
            }
            Stmt::HookCall(_) => {}
        }
    }
}
