//! Recursive-descent parser for limit-state expressions.
//!
//! Precedence, loosest first: `+ -`, `* /`, unary minus, `^`
//! (right-associative, so `-x^2 = -(x^2)` and `2^3^2 = 2^9`).

use thiserror::Error;

use super::ast::{BinOp, Expr, Func};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable x{index} at byte {offset} exceeds arity {arity}")]
    VariableOutOfRange { index: usize, arity: usize, offset: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next_token(&mut self) -> Result<(Token, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((Token::End, start));
        };
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Token::Op(c as char)
            }
            b'(' => {
                self.pos += 1;
                Token::LParen
            }
            b')' => {
                self.pos += 1;
                Token::RParen
            }
            b'0'..=b'9' | b'.' => self.number(start)?,
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < bytes.len() && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_') {
                    self.pos += 1;
                }
                Token::Ident(self.src[start..self.pos].to_string())
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(syntax(start, format!("unexpected character '{ch}'")));
            }
        };
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<Token, ParseError> {
        let bytes = self.src.as_bytes();
        let digits = |pos: &mut usize| {
            let s = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            *pos - s
        };
        let mut n = digits(&mut self.pos);
        if self.pos < bytes.len() && bytes[self.pos] == b'.' {
            self.pos += 1;
            n += digits(&mut self.pos);
        }
        if n == 0 {
            return Err(syntax(start, "malformed number".into()));
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let mut p = self.pos + 1;
            if p < bytes.len() && (bytes[p] == b'+' || bytes[p] == b'-') {
                p += 1;
            }
            if digits(&mut p) == 0 {
                return Err(syntax(self.pos, "malformed exponent".into()));
            }
            self.pos = p;
        }
        let text = &self.src[start..self.pos];
        let v: f64 = text.parse().map_err(|_| syntax(start, format!("malformed number '{text}'")))?;
        if !v.is_finite() {
            return Err(syntax(start, format!("number '{text}' is out of range")));
        }
        Ok(Token::Number(v))
    }
}

fn syntax(offset: usize, message: String) -> ParseError {
    ParseError::Syntax { offset, message }
}

pub(crate) struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Token,
    offset: usize,
    arity: usize,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(src: &'a str, arity: usize) -> Result<Self, ParseError> {
        let mut lexer = Lexer { src, pos: 0 };
        let (tok, offset) = lexer.next_token()?;
        Ok(Self { lexer, tok, offset, arity })
    }

    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, offset) = self.lexer.next_token()?;
        self.tok = tok;
        self.offset = offset;
        Ok(())
    }

    pub(crate) fn parse_all(mut self) -> Result<Expr, ParseError> {
        if self.tok == Token::End {
            return Err(syntax(0, "empty expression".into()));
        }
        let e = self.expr()?;
        if self.tok != Token::End {
            return Err(syntax(self.offset, format!("unexpected {}", describe(&self.tok))));
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Token::Op('+') => BinOp::Add,
                Token::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Token::Op('*') => BinOp::Mul,
                Token::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Token::Op('-') {
            self.bump()?;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.tok == Token::Op('^') {
            self.bump()?;
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset;
        match std::mem::replace(&mut self.tok, Token::End) {
            Token::Number(v) => {
                self.bump()?;
                Ok(Expr::Const(v))
            }
            Token::LParen => {
                self.bump()?;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Token::Ident(name) => {
                self.bump()?;
                if let Some(func) = Func::from_name(&name) {
                    if self.tok != Token::LParen {
                        return Err(syntax(self.offset, format!("expected '(' after function '{name}'")));
                    }
                    self.bump()?;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                self.variable(&name, offset)
            }
            other => {
                self.tok = other;
                Err(syntax(offset, format!("expected an operand, found {}", describe(&self.tok))))
            }
        }
    }

    fn variable(&self, name: &str, offset: usize) -> Result<Expr, ParseError> {
        let index = name
            .strip_prefix('x')
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|d| d.parse::<usize>().ok())
            .ok_or_else(|| ParseError::UnknownIdentifier { name: name.to_string(), offset })?;
        if index == 0 || index > self.arity {
            return Err(ParseError::VariableOutOfRange { index, arity: self.arity, offset });
        }
        Ok(Expr::Var(index - 1))
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.tok != Token::RParen {
            return Err(syntax(self.offset, format!("expected ')', found {}", describe(&self.tok))));
        }
        self.bump()
    }
}

fn describe(tok: &Token) -> String {
    match tok {
        Token::Number(v) => format!("number {v}"),
        Token::Ident(s) => format!("identifier '{s}'"),
        Token::Op(c) => format!("operator '{c}'"),
        Token::LParen => "'('".into(),
        Token::RParen => "')'".into(),
        Token::End => "end of input".into(),
    }
}
