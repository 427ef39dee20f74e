//! Recursive-descent parser for the canonical infix grammar:
//! operators `+ - * / ^`, functions `sin cos exp`, variables `x0..x{n-1}`,
//! decimal constants. Whitespace-insensitive.

use super::{Expr, UnaryOp};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedToken(String),
    UnexpectedEnd,
    UnknownFunction(String),
    UnknownIdentifier(String),
    UnknownVariable { index: usize, dim: usize },
    InvalidNumber(String),
    NonIntegerExponent,
    TrailingInput,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character '{c}'"),
            ParseErrorKind::UnexpectedToken(t) => write!(f, "unexpected token '{t}'"),
            ParseErrorKind::UnexpectedEnd => write!(f, "unexpected end of input"),
            ParseErrorKind::UnknownFunction(n) => write!(f, "unknown function '{n}'"),
            ParseErrorKind::UnknownIdentifier(n) => write!(f, "unknown identifier '{n}'"),
            ParseErrorKind::UnknownVariable { index, dim } => {
                write!(f, "variable x{index} out of range for dimension {dim}")
            }
            ParseErrorKind::InvalidNumber(s) => write!(f, "invalid number '{s}'"),
            ParseErrorKind::NonIntegerExponent => write!(f, "exponent must be a non-negative integer"),
            ParseErrorKind::TrailingInput => write!(f, "trailing input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the source text.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0 }
    }

    fn tokens(mut self) -> Result<Vec<(Token, usize)>, ParseError> {
        let mut out = Vec::new();
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() {
            let start = self.pos;
            let c = bytes[self.pos] as char;
            match c {
                ' ' | '\t' | '\n' | '\r' => {
                    self.pos += 1;
                }
                '+' => {
                    out.push((Token::Plus, start));
                    self.pos += 1;
                }
                '-' => {
                    out.push((Token::Minus, start));
                    self.pos += 1;
                }
                '*' => {
                    out.push((Token::Star, start));
                    self.pos += 1;
                }
                '/' => {
                    out.push((Token::Slash, start));
                    self.pos += 1;
                }
                '^' => {
                    out.push((Token::Caret, start));
                    self.pos += 1;
                }
                '(' => {
                    out.push((Token::LParen, start));
                    self.pos += 1;
                }
                ')' => {
                    out.push((Token::RParen, start));
                    self.pos += 1;
                }
                '0'..='9' | '.' => {
                    let text = self.read_number();
                    let value: f64 = text.parse().map_err(|_| ParseError {
                        kind: ParseErrorKind::InvalidNumber(text.to_string()),
                        offset: start,
                    })?;
                    if !value.is_finite() {
                        return Err(ParseError {
                            kind: ParseErrorKind::InvalidNumber(text.to_string()),
                            offset: start,
                        });
                    }
                    out.push((Token::Number(value), start));
                }
                'a'..='z' | 'A'..='Z' => {
                    let end = self.src[self.pos..]
                        .find(|ch: char| !ch.is_ascii_alphanumeric())
                        .map(|i| self.pos + i)
                        .unwrap_or(self.src.len());
                    out.push((Token::Ident(self.src[self.pos..end].to_string()), start));
                    self.pos = end;
                }
                _ => {
                    return Err(ParseError {
                        kind: ParseErrorKind::UnexpectedChar(c),
                        offset: start,
                    })
                }
            }
        }
        Ok(out)
    }

    fn read_number(&mut self) -> &'a str {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let mut probe = self.pos + 1;
            if probe < bytes.len() && (bytes[probe] == b'+' || bytes[probe] == b'-') {
                probe += 1;
            }
            if probe < bytes.len() && bytes[probe].is_ascii_digit() {
                self.pos = probe;
                while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        &self.src[start..self.pos]
    }
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    cursor: usize,
    dim: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.cursor)
            .map(|(_, o)| *o)
            .unwrap_or(self.len)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.cursor).map(|(t, _)| t.clone());
        self.cursor += 1;
        t
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            offset: self.offset(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    let rhs = self.term()?;
                    acc = Expr::add(acc, rhs);
                }
                Some(Token::Minus) => {
                    self.bump();
                    let rhs = self.term()?;
                    acc = Expr::sub(acc, rhs);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.bump();
                    let rhs = self.factor()?;
                    acc = Expr::mul(acc, rhs);
                }
                Some(Token::Slash) => {
                    self.bump();
                    let rhs = self.factor()?;
                    acc = Expr::div(acc, rhs);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.bump();
            let inner = self.factor()?;
            return Ok(Expr::neg(inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.atom()?;
        while matches!(self.peek(), Some(Token::Caret)) {
            self.bump();
            let off = self.offset();
            match self.bump() {
                Some(Token::Number(v)) => {
                    if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
                        return Err(ParseError {
                            kind: ParseErrorKind::NonIntegerExponent,
                            offset: off,
                        });
                    }
                    base = Expr::pow(base, v as u32);
                }
                _ => {
                    return Err(ParseError {
                        kind: ParseErrorKind::NonIntegerExponent,
                        offset: off,
                    })
                }
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.bump() {
            Some(Token::Number(v)) => Ok(Expr::constant(v)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some(Token::RParen) => Ok(inner),
                    Some(t) => Err(ParseError {
                        kind: ParseErrorKind::UnexpectedToken(format!("{t:?}")),
                        offset,
                    }),
                    None => Err(ParseError {
                        kind: ParseErrorKind::UnexpectedEnd,
                        offset: self.len,
                    }),
                }
            }
            Some(Token::Ident(name)) => {
                if matches!(self.peek(), Some(Token::LParen)) {
                    let op = match name.as_str() {
                        "sin" => UnaryOp::Sin,
                        "cos" => UnaryOp::Cos,
                        "exp" => UnaryOp::Exp,
                        _ => {
                            return Err(ParseError {
                                kind: ParseErrorKind::UnknownFunction(name),
                                offset,
                            })
                        }
                    };
                    self.bump();
                    let inner = self.expr()?;
                    match self.bump() {
                        Some(Token::RParen) => Ok(Expr::unary(op, inner)),
                        _ => Err(ParseError {
                            kind: ParseErrorKind::UnexpectedEnd,
                            offset: self.len,
                        }),
                    }
                } else if let Some(idx) = variable_index(&name) {
                    if idx >= self.dim {
                        return Err(ParseError {
                            kind: ParseErrorKind::UnknownVariable {
                                index: idx,
                                dim: self.dim,
                            },
                            offset,
                        });
                    }
                    Ok(Expr::variable(idx))
                } else {
                    Err(ParseError {
                        kind: ParseErrorKind::UnknownIdentifier(name),
                        offset,
                    })
                }
            }
            Some(t) => Err(ParseError {
                kind: ParseErrorKind::UnexpectedToken(format!("{t:?}")),
                offset,
            }),
            None => Err(ParseError {
                kind: ParseErrorKind::UnexpectedEnd,
                offset: self.len,
            }),
        }
    }
}

fn variable_index(name: &str) -> Option<usize> {
    let rest = name.strip_prefix('x')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

/// Parses a canonical infix string against a system of dimension `dim`.
pub fn parse(text: &str, dim: usize) -> Result<Expr, ParseError> {
    let tokens = Lexer::new(text).tokens()?;
    let mut parser = Parser {
        tokens,
        cursor: 0,
        dim,
        len: text.len(),
    };
    let e = parser.expr()?;
    if parser.cursor != parser.tokens.len() {
        return Err(parser.err(ParseErrorKind::TrailingInput));
    }
    Ok(e)
}
