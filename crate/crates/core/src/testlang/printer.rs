// SPDX-License-Identifier: Apache-2.0
//! Canonical pretty-printer. Output re-parses to a structurally equal tree.

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

pub fn serialize_file(file: &ParsedFile) -> String {
    let mut out = String::new();
    let mut sections: Vec<String> = Vec::new();

    if !file.file_bindings.is_empty() {
        let mut s = String::new();
        for b in &file.file_bindings {
            match &b.init {
                Some(e) => writeln!(s, "let {} = {};", b.name, expr_to_string(e)).unwrap(),
                None => writeln!(s, "let {};", b.name).unwrap(),
            }
        }
        sections.push(s);
    }
    if let Some(block) = &file.before_hook {
        sections.push(format!("setUp {}\n", block_to_string(block, 0)));
    }
    if let Some(block) = &file.after_hook {
        sections.push(format!("tearDown {}\n", block_to_string(block, 0)));
    }
    for func in &file.functions {
        sections.push(format!(
            "fn {}({}) {}\n",
            func.name,
            func.params.join(", "),
            block_to_string(&func.body, 0)
        ));
    }
    for test in &file.tests {
        sections.push(test_to_string(test));
    }
    for (i, s) in sections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(s);
    }
    out
}

pub fn test_to_string(test: &TestCase) -> String {
    let mut s = String::new();
    if let Some(meta) = &test.origin_meta {
        writeln!(s, "//@fragment origin={} order={}", meta.origin, meta.order).unwrap();
    }
    writeln!(s, "test {} {}", test.name, block_to_string(&test.constituents, 0)).unwrap();
    s
}

pub fn block_to_string(block: &[Stmt], depth: usize) -> String {
    if block.is_empty() {
        return "{ }".to_string();
    }
    let mut s = String::from("{\n");
    for stmt in block {
        write_stmt(&mut s, stmt, depth + 1);
    }
    s.push_str(&INDENT.repeat(depth));
    s.push('}');
    s
}

pub fn stmt_to_string(stmt: &Stmt) -> String {
    let mut s = String::new();
    write_stmt(&mut s, stmt, 0);
    s.trim_end().to_string()
}

fn write_stmt(s: &mut String, stmt: &Stmt, depth: usize) {
    let pad = INDENT.repeat(depth);
    match stmt {
        Stmt::Let { name, init } => match init {
            Some(e) => writeln!(s, "{pad}let {name} = {};", expr_to_string(e)),
            None => writeln!(s, "{pad}let {name};"),
        }
        .unwrap(),
        Stmt::Assign { name, value } => {
            writeln!(s, "{pad}{name} = {};", expr_to_string(value)).unwrap()
        }
        Stmt::If { .. } => {
            s.push_str(&pad);
            write_if(s, stmt, depth);
            s.push('\n');
        }
        Stmt::While { cond, body } => writeln!(
            s,
            "{pad}while ({}) {}",
            expr_to_string(cond),
            block_to_string(body, depth)
        )
        .unwrap(),
        Stmt::Try {
            body,
            catch_var,
            handler,
            ..
        } => writeln!(
            s,
            "{pad}try {} catch ({catch_var}) {}",
            block_to_string(body, depth),
            block_to_string(handler, depth)
        )
        .unwrap(),
        Stmt::Throw(e) => writeln!(s, "{pad}throw {};", expr_to_string(e)).unwrap(),
        Stmt::Return(None) => writeln!(s, "{pad}return;").unwrap(),
        Stmt::Return(Some(e)) => writeln!(s, "{pad}return {};", expr_to_string(e)).unwrap(),
        Stmt::Expr(e) => writeln!(s, "{pad}{};", expr_to_string(e)).unwrap(),
        Stmt::Assert(e) => writeln!(s, "{pad}assert({});", expr_to_string(e)).unwrap(),
        Stmt::AssertEquals(a, b) => writeln!(
            s,
            "{pad}assertEquals({}, {});",
            expr_to_string(a),
            expr_to_string(b)
        )
        .unwrap(),
        Stmt::Fail(e) => writeln!(s, "{pad}fail({});", expr_to_string(e)).unwrap(),
        Stmt::HookCall(h) => writeln!(s, "{pad}{}();", h.keyword()).unwrap(),
    }
}

fn write_if(s: &mut String, stmt: &Stmt, depth: usize) {
    let Stmt::If {
        cond,
        then_block,
        else_block,
        ..
    } = stmt
    else {
        unreachable!()
    };
    write!(
        s,
        "if ({}) {}",
        expr_to_string(cond),
        block_to_string(then_block, depth)
    )
    .unwrap();
    match else_block.as_deref() {
        None => {}
        Some([nested @ Stmt::If { .. }]) => {
            s.push_str(" else ");
            write_if(s, nested, depth);
        }
        Some(block) => write!(s, " else {}", block_to_string(block, depth)).unwrap(),
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn write_expr(s: &mut String, e: &Expr) {
    match e {
        Expr::Int(v) => write!(s, "{v}").unwrap(),
        Expr::Bool(b) => write!(s, "{b}").unwrap(),
        Expr::Null => s.push_str("null"),
        Expr::Str(text) => {
            s.push('"');
            for c in text.chars() {
                match c {
                    '"' => s.push_str("\\\""),
                    '\\' => s.push_str("\\\\"),
                    '\n' => s.push_str("\\n"),
                    '\t' => s.push_str("\\t"),
                    c => s.push(c),
                }
            }
            s.push('"');
        }
        Expr::Var(name) => s.push_str(name),
        Expr::Call { name, args } => {
            s.push_str(name);
            s.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                write_expr(s, a);
            }
            s.push(')');
        }
        Expr::Unary { op, operand } => {
            s.push_str(match op {
                UnaryOp::Not => "!",
                UnaryOp::Neg => "-",
            });
            // A non-negative literal under `-` would re-parse as a folded literal.
            let wrap = matches!(operand.as_ref(), Expr::Binary { .. })
                || (*op == UnaryOp::Neg && matches!(operand.as_ref(), Expr::Int(v) if *v >= 0));
            write_wrapped(s, operand, wrap);
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            write_wrapped(s, lhs, binary_prec(lhs).is_some_and(|q| q < p));
            write!(s, " {} ", op.symbol()).unwrap();
            write_wrapped(s, rhs, binary_prec(rhs).is_some_and(|q| q <= p));
        }
    }
}

fn binary_prec(e: &Expr) -> Option<u8> {
    match e {
        Expr::Binary { op, .. } => Some(op.precedence()),
        _ => None,
    }
}

fn write_wrapped(s: &mut String, e: &Expr, wrap: bool) {
    if wrap {
        s.push('(');
        write_expr(s, e);
        s.push(')');
    } else {
        write_expr(s, e);
    }
}
