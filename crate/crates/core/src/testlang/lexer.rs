// SPDX-License-Identifier: Apache-2.0
use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i128),
    Str(String),
    /// `//@fragment origin=<id> order=<int>`
    FragmentMeta { origin: String, order: u32 },
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const PUNCTS: &[&str] = &[
    "==", "!=", "<=", ">=", "&&", "||", "+", "-", "*", "/", "%", "<", ">", "!", "=", "(", ")",
    "{", "}", ",", ";",
];

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        let (tl, tc) = (line, col);
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            let start = i;
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            if let Some(rest) = text.strip_prefix("//@fragment") {
                let tok = parse_fragment_meta(rest).ok_or_else(|| ParseError::Syntax {
                    line: tl,
                    col: tc,
                    message: format!("malformed fragment metadata `{}`", text.trim_end()),
                })?;
                out.push(Token { tok, line: tl, col: tc });
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            let value: i128 = text.parse().map_err(|_| ParseError::Syntax {
                line: tl,
                col: tc,
                message: format!("integer literal `{text}` out of range"),
            })?;
            if value > i64::MAX as i128 + 1 {
                return Err(ParseError::Syntax {
                    line: tl,
                    col: tc,
                    message: format!("integer literal `{text}` out of range"),
                });
            }
            out.push(Token { tok: Tok::Int(value), line: tl, col: tc });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                let Some(&ch) = chars.get(i) else {
                    return Err(ParseError::Syntax {
                        line: tl,
                        col: tc,
                        message: "unterminated string literal".into(),
                    });
                };
                match ch {
                    '"' => {
                        bump!();
                        break;
                    }
                    '\\' => {
                        bump!();
                        let esc = chars.get(i).copied();
                        let decoded = match esc {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('\\') => '\\',
                            Some('"') => '"',
                            _ => {
                                return Err(ParseError::Syntax {
                                    line,
                                    col,
                                    message: "invalid escape sequence".into(),
                                })
                            }
                        };
                        s.push(decoded);
                        bump!();
                    }
                    '\n' => {
                        return Err(ParseError::Syntax {
                            line: tl,
                            col: tc,
                            message: "newline in string literal".into(),
                        })
                    }
                    other => {
                        s.push(other);
                        bump!();
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), line: tl, col: tc });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let Some(p) = PUNCTS.iter().find(|p| rest.starts_with(**p)) else {
            return Err(ParseError::Syntax {
                line: tl,
                col: tc,
                message: format!("unexpected character `{c}`"),
            });
        };
        for _ in 0..p.len() {
            bump!();
        }
        out.push(Token { tok: Tok::Punct(p), line: tl, col: tc });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

fn parse_fragment_meta(rest: &str) -> Option<Tok> {
    let mut origin = None;
    let mut order = None;
    for part in rest.split_whitespace() {
        let (key, value) = part.split_once('=')?;
        match key {
            "origin" if is_identifier(value) => origin = Some(value.to_string()),
            "order" => order = value.parse::<u32>().ok().filter(|o| *o > 0),
            _ => return None,
        }
    }
    Some(Tok::FragmentMeta {
        origin: origin?,
        order: order?,
    })
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}
