// SPDX-License-Identifier: Apache-2.0
//! Recursive-descent parser for `.tl` files.

use std::collections::{BTreeMap, HashSet};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

const KEYWORDS: &[&str] = &[
    "fn",
    "test",
    "let",
    "if",
    "else",
    "while",
    "try",
    "catch",
    "throw",
    "return",
    "true",
    "false",
    "null",
    "assert",
    "assertEquals",
    "fail",
    "setUp",
    "tearDown",
];

pub(crate) fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

/// Parses a whole file. Every `if`/`try` inside a function body receives an
/// ordinal; those in tests and hooks stay untracked.
pub fn parse_file(source: &str, path: &str) -> Result<ParsedFile, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut file = ParsedFile {
        path: path.to_string(),
        file_bindings: Vec::new(),
        before_hook: None,
        after_hook: None,
        functions: Vec::new(),
        tests: Vec::new(),
    };
    let mut names = HashSet::new();
    let mut tests = HashSet::new();
    let mut bindings = HashSet::new();

    loop {
        let tok = p.peek().clone();
        match &tok.tok {
            Tok::Eof => break,
            Tok::FragmentMeta { origin, order } => {
                p.advance();
                if !p.at_ident("test") {
                    return Err(p.error("fragment metadata must immediately precede a test"));
                }
                let mut test = p.test_decl()?;
                test.origin_meta = Some(FragmentMeta {
                    origin: origin.clone(),
                    order: *order,
                });
                if !tests.insert(test.name.clone()) {
                    return Err(ParseError::Duplicate(format!("test `{}`", test.name)));
                }
                file.tests.push(test);
            }
            Tok::Ident(word) => match word.as_str() {
                "test" => {
                    let test = p.test_decl()?;
                    if !tests.insert(test.name.clone()) {
                        return Err(ParseError::Duplicate(format!("test `{}`", test.name)));
                    }
                    file.tests.push(test);
                }
                "fn" => {
                    let mut func = p.function_decl()?;
                    if BUILTINS.contains(&func.name.as_str()) {
                        return Err(ParseError::Syntax {
                            line: tok.line,
                            col: tok.col,
                            message: format!("`{}` is a builtin and cannot be redefined", func.name),
                        });
                    }
                    if !names.insert(func.name.clone()) {
                        return Err(ParseError::Duplicate(format!("function `{}`", func.name)));
                    }
                    number_elements(&mut func.body);
                    file.functions.push(func);
                }
                "let" => {
                    p.advance();
                    let name = p.ident()?;
                    let init = if p.eat_punct("=") { Some(p.expr()?) } else { None };
                    p.expect_punct(";")?;
                    if !bindings.insert(name.clone()) {
                        return Err(ParseError::Duplicate(format!("file binding `{name}`")));
                    }
                    file.file_bindings.push(Binding { name, init });
                }
                "setUp" | "tearDown" => {
                    let is_setup = word == "setUp";
                    p.advance();
                    let block = p.block()?;
                    let slot = if is_setup {
                        &mut file.before_hook
                    } else {
                        &mut file.after_hook
                    };
                    if slot.is_some() {
                        return Err(ParseError::Duplicate(format!("hook `{word}`")));
                    }
                    *slot = Some(block);
                }
                _ => return Err(p.error(&format!("expected a declaration, found `{word}`"))),
            },
            other => return Err(p.error(&format!("expected a declaration, found {}", describe(other)))),
        }
    }

    check_fragment_orders(&file)?;
    Ok(file)
}

fn check_fragment_orders(file: &ParsedFile) -> Result<(), ParseError> {
    let mut groups: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for t in &file.tests {
        if let Some(meta) = &t.origin_meta {
            groups.entry(meta.origin.as_str()).or_default().push(meta.order);
        }
    }
    for (origin, mut orders) in groups {
        orders.sort_unstable();
        if orders.iter().enumerate().any(|(i, o)| *o as usize != i + 1) {
            return Err(ParseError::FragmentOrder(origin.to_string()));
        }
    }
    Ok(())
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Str(_) => "string literal".into(),
        Tok::FragmentMeta { .. } => "fragment metadata".into(),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of file".into(),
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.tokens[(self.pos + n).min(self.tokens.len() - 1)].tok
    }

    fn advance(&mut self) -> &Token {
        let t = &self.tokens[self.pos];
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: &str) -> ParseError {
        let t = self.peek();
        ParseError::Syntax {
            line: t.line,
            col: t.col,
            message: message.to_string(),
        }
    }

    fn at_ident(&self, word: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(w) if w == word)
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(q) if *q == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{p}`, found {}", describe(&self.peek().tok))))
        }
    }

    fn expect_keyword(&mut self, word: &str) -> Result<(), ParseError> {
        if self.at_ident(word) {
            self.advance();
            Ok(())
        } else {
            Err(self.error(&format!("expected `{word}`, found {}", describe(&self.peek().tok))))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if !is_keyword(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            other => Err(self.error(&format!("expected identifier, found {}", describe(other)))),
        }
    }

    fn test_decl(&mut self) -> Result<TestCase, ParseError> {
        self.expect_keyword("test")?;
        let name = self.ident()?;
        let constituents = self.block()?;
        Ok(TestCase {
            name,
            constituents,
            origin_meta: None,
        })
    }

    fn function_decl(&mut self) -> Result<FunctionDecl, ParseError> {
        self.expect_keyword("fn")?;
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.at_punct(")") {
            loop {
                let param = self.ident()?;
                if params.contains(&param) {
                    return Err(ParseError::Duplicate(format!("parameter `{param}` of `{name}`")));
                }
                params.push(param);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let body = self.block()?;
        Ok(FunctionDecl { name, params, body })
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.at_punct("}") {
            if matches!(self.peek().tok, Tok::Eof) {
                return Err(self.error("unexpected end of file inside block"));
            }
            stmts.push(self.stmt()?);
        }
        self.expect_punct("}")?;
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let word = match &self.peek().tok {
            Tok::Ident(w) => w.clone(),
            Tok::FragmentMeta { .. } => {
                return Err(self.error("fragment metadata is only allowed before a test"))
            }
            _ => {
                let e = self.expr()?;
                self.expect_punct(";")?;
                return Ok(Stmt::Expr(e));
            }
        };
        match word.as_str() {
            "let" => {
                self.advance();
                let name = self.ident()?;
                let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
                self.expect_punct(";")?;
                Ok(Stmt::Let { name, init })
            }
            "if" => self.if_stmt(),
            "while" => {
                self.advance();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let body = self.block()?;
                Ok(Stmt::While { cond, body })
            }
            "try" => {
                self.advance();
                let body = self.block()?;
                self.expect_keyword("catch")?;
                self.expect_punct("(")?;
                let catch_var = self.ident()?;
                self.expect_punct(")")?;
                let handler = self.block()?;
                Ok(Stmt::Try {
                    ordinal: None,
                    body,
                    catch_var,
                    handler,
                })
            }
            "throw" => {
                self.advance();
                let e = self.expr()?;
                self.expect_punct(";")?;
                Ok(Stmt::Throw(e))
            }
            "return" => {
                self.advance();
                if self.eat_punct(";") {
                    return Ok(Stmt::Return(None));
                }
                let e = self.expr()?;
                self.expect_punct(";")?;
                Ok(Stmt::Return(Some(e)))
            }
            "assert" | "fail" => {
                self.advance();
                self.expect_punct("(")?;
                let e = self.expr()?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                Ok(if word == "assert" {
                    Stmt::Assert(e)
                } else {
                    Stmt::Fail(e)
                })
            }
            "assertEquals" => {
                self.advance();
                self.expect_punct("(")?;
                let a = self.expr()?;
                self.expect_punct(",")?;
                let b = self.expr()?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                Ok(Stmt::AssertEquals(a, b))
            }
            "setUp" | "tearDown" => {
                self.advance();
                self.expect_punct("(")?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                Ok(Stmt::HookCall(if word == "setUp" {
                    Hook::SetUp
                } else {
                    Hook::TearDown
                }))
            }
            _ if !is_keyword(&word) && matches!(self.peek_at(1), Tok::Punct("=")) => {
                self.advance();
                self.advance();
                let value = self.expr()?;
                self.expect_punct(";")?;
                Ok(Stmt::Assign { name: word, value })
            }
            _ => {
                let e = self.expr()?;
                self.expect_punct(";")?;
                Ok(Stmt::Expr(e))
            }
        }
    }

    fn if_stmt(&mut self) -> Result<Stmt, ParseError> {
        self.expect_keyword("if")?;
        self.expect_punct("(")?;
        let cond = self.expr()?;
        self.expect_punct(")")?;
        let then_block = self.block()?;
        let else_block = if self.at_ident("else") {
            self.advance();
            if self.at_ident("if") {
                Some(vec![self.if_stmt()?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt::If {
            ordinal: None,
            cond,
            then_block,
            else_block,
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        let Tok::Punct(p) = &self.peek().tok else {
            return None;
        };
        Some(match *p {
            "+" => BinaryOp::Add,
            "-" => BinaryOp::Sub,
            "*" => BinaryOp::Mul,
            "/" => BinaryOp::Div,
            "%" => BinaryOp::Rem,
            "==" => BinaryOp::Eq,
            "!=" => BinaryOp::Ne,
            "<" => BinaryOp::Lt,
            "<=" => BinaryOp::Le,
            ">" => BinaryOp::Gt,
            ">=" => BinaryOp::Ge,
            "&&" => BinaryOp::And,
            "||" => BinaryOp::Or,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            if op.precedence() < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_punct("!") {
            return Ok(Expr::Unary {
                op: UnaryOp::Not,
                operand: Box::new(self.unary()?),
            });
        }
        if self.at_punct("-") {
            self.advance();
            // `-<digits>` is a negative literal.
            if let Tok::Int(v) = self.peek().tok {
                self.advance();
                return Ok(Expr::Int((-v) as i64));
            }
            return Ok(Expr::Unary {
                op: UnaryOp::Neg,
                operand: Box::new(self.unary()?),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let tok = self.peek().clone();
        match tok.tok {
            Tok::Int(v) => {
                if v > i64::MAX as i128 {
                    return Err(self.error(&format!("integer literal `{v}` out of range")));
                }
                self.advance();
                Ok(Expr::Int(v as i64))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Str(s))
            }
            Tok::Punct("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(ref w) => match w.as_str() {
                "true" => {
                    self.advance();
                    Ok(Expr::Bool(true))
                }
                "false" => {
                    self.advance();
                    Ok(Expr::Bool(false))
                }
                "null" => {
                    self.advance();
                    Ok(Expr::Null)
                }
                _ => {
                    let name = self.ident()?;
                    if self.eat_punct("(") {
                        let mut args = Vec::new();
                        if !self.at_punct(")") {
                            loop {
                                args.push(self.expr()?);
                                if !self.eat_punct(",") {
                                    break;
                                }
                            }
                        }
                        self.expect_punct(")")?;
                        Ok(Expr::Call { name, args })
                    } else {
                        Ok(Expr::Var(name))
                    }
                }
            },
            other => Err(self.error(&format!("expected expression, found {}", describe(&other)))),
        }
    }
}
