//! Arithmetic expressions in one variable `x`: real literals, + - * /,
//! unary minus, parentheses, and the functions sin, cos, exp. Small enough
//! to audit, big enough for every coefficient profile the tools need.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var => x,
            Expr::Neg(e) => -e.eval(x),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Call(f, e) => f.apply(e.eval(x)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            _ => 4,
        }
    }
}

/// Canonical text form; `parse(format!("{e}"))` evaluates identically to `e`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
            if e.precedence() < min_prec {
                write!(f, "(")?;
                fmt::Display::fmt(e, f)?;
                write!(f, ")")
            } else {
                fmt::Display::fmt(e, f)
            }
        }
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    // keep literals non-negative in printed form
                    write!(f, "(-{})", -*v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var => write!(f, "x"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                child(f, e, 3)
            }
            Expr::Bin(op, a, b) => {
                let (prec, sym) = match op {
                    BinOp::Add => (1, " + "),
                    BinOp::Sub => (1, " - "),
                    BinOp::Mul => (2, "*"),
                    BinOp::Div => (2, "/"),
                };
                child(f, a, prec)?;
                write!(f, "{sym}")?;
                // right child of - and / needs strictly higher precedence
                child(f, b, prec + u8::from(matches!(op, BinOp::Sub | BinOp::Div)))
            }
            Expr::Call(func, e) => {
                write!(f, "{}(", func.name())?;
                fmt::Display::fmt(e, f)?;
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Token {
    Num(f64),
    Ident(usize, usize), // byte range into the source
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, bytes: src.as_bytes(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token plus its starting byte offset; None at end of input.
    fn next(&mut self) -> Result<Option<(Token, usize)>> {
        self.skip_ws();
        if self.pos >= self.bytes.len() {
            return Ok(None);
        }
        let start = self.pos;
        let b = self.bytes[start];
        let tok = match b {
            b'+' => Token::Plus,
            b'-' => Token::Minus,
            b'*' => Token::Star,
            b'/' => Token::Slash,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'0'..=b'9' | b'.' => {
                self.pos = scan_number(self.bytes, start);
                let text = &self.src[start..self.pos];
                let value: f64 = text.parse().map_err(|_| Error::Parse {
                    position: start,
                    message: format!("invalid number literal `{text}`"),
                })?;
                return Ok(Some((Token::Num(value), start)));
            }
            _ if b.is_ascii_alphabetic() || b == b'_' => {
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                return Ok(Some((Token::Ident(start, self.pos), start)));
            }
            _ => {
                return Err(Error::Parse {
                    position: start,
                    message: format!("unexpected character `{}`", &self.src[start..][..utf8_len(b)]),
                })
            }
        };
        self.pos += 1;
        Ok(Some((tok, start)))
    }
}

fn utf8_len(first_byte: u8) -> usize {
    match first_byte {
        0x00..=0x7f => 1,
        0xc0..=0xdf => 2,
        0xe0..=0xef => 3,
        _ => 4,
    }
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
        i += 1;
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            i = j;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    i
}

struct Parser<'a> {
    src: &'a str,
    lexer: Lexer<'a>,
    peeked: Option<(Token, usize)>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self> {
        let mut lexer = Lexer::new(src);
        let peeked = lexer.next()?;
        Ok(Self { src, lexer, peeked })
    }

    fn peek(&self) -> Option<(Token, usize)> {
        self.peeked
    }

    fn advance(&mut self) -> Result<Option<(Token, usize)>> {
        let out = self.peeked.take();
        self.peeked = self.lexer.next()?;
        Ok(out)
    }

    fn expr(&mut self, depth: usize) -> Result<Expr> {
        let mut lhs = self.term(depth)?;
        while let Some((tok, _)) = self.peek() {
            let op = match tok {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance()?;
            let rhs = self.term(depth)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self, depth: usize) -> Result<Expr> {
        let mut lhs = self.factor(depth)?;
        while let Some((tok, _)) = self.peek() {
            let op = match tok {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => break,
            };
            self.advance()?;
            let rhs = self.factor(depth)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self, depth: usize) -> Result<Expr> {
        if depth > 256 {
            return Err(Error::Parse {
                position: self.peek().map_or(self.src.len(), |(_, p)| p),
                message: "expression nests too deeply".into(),
            });
        }
        match self.peek() {
            Some((Token::Minus, _)) => {
                self.advance()?;
                Ok(Expr::Neg(Box::new(self.factor(depth + 1)?)))
            }
            _ => self.primary(depth),
        }
    }

    fn primary(&mut self, depth: usize) -> Result<Expr> {
        let Some((tok, pos)) = self.advance()? else {
            return Err(Error::Parse {
                position: self.src.len(),
                message: "unexpected end of input".into(),
            });
        };
        match tok {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::Ident(a, b) => {
                let name = &self.src[a..b];
                if name == "x" {
                    return Ok(Expr::Var);
                }
                let func = match name {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    _ => {
                        return Err(Error::UnknownIdentifier {
                            name: name.to_owned(),
                            position: pos,
                        })
                    }
                };
                match self.advance()? {
                    Some((Token::LParen, _)) => {}
                    other => {
                        return Err(Error::Parse {
                            position: other.map_or(self.src.len(), |(_, p)| p),
                            message: format!("expected `(` after `{name}`"),
                        })
                    }
                }
                let arg = self.expr(depth + 1)?;
                self.expect_rparen()?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Token::LParen => {
                let inner = self.expr(depth + 1)?;
                self.expect_rparen()?;
                Ok(inner)
            }
            _ => Err(Error::Parse {
                position: pos,
                message: "expected a number, `x`, a function call, or `(`".into(),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.advance()? {
            Some((Token::RParen, _)) => Ok(()),
            other => Err(Error::Parse {
                position: other.map_or(self.src.len(), |(_, p)| p),
                message: "expected `)`".into(),
            }),
        }
    }
}

/// Parse an expression; the whole input must be consumed.
pub fn parse_expr(text: &str) -> Result<Expr> {
    let mut parser = Parser::new(text)?;
    let expr = parser.expr(0)?;
    if let Some((_, pos)) = parser.peek() {
        return Err(Error::Parse {
            position: pos,
            message: "trailing input after expression".into(),
        });
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(text: &str, x: f64) -> f64 {
        parse_expr(text).unwrap().eval(x)
    }

    #[test]
    fn literal_affine() {
        assert_eq!(eval("1 + 0.5*x", 0.0), 1.0);
        assert_eq!(eval("1 + 0.5*x", 1.0), 1.5);
    }

    #[test]
    fn cos_identity() {
        assert_eq!(eval("cos(0)", 0.7), 1.0);
    }

    #[test]
    fn cosine_profile_matches_direct_arithmetic() {
        // direct arithmetic oracle: 2 + cos(pi * 1) / 2 = 2 - 0.5
        let x = 1.0;
        let direct = 2.0 + (std::f64::consts::PI * x).cos() / 2.0;
        assert!((direct - 1.5).abs() < 1e-15);
        assert!((eval("2 + cos(3.141592653589793*x)/2", x) - direct).abs() < 1e-15);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("2 + 3*4", 0.0), 14.0);
        assert_eq!(eval("2 - 3 - 4", 0.0), -5.0);
        assert_eq!(eval("24/4/2", 0.0), 3.0);
        assert_eq!(eval("-x*x", 2.0), -4.0);
        assert_eq!(eval("2e-1 + 1E2", 0.0), 100.2);
    }

    #[test]
    fn errors_carry_positions() {
        match parse_expr("1 + ") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_expr("1 + y") {
            Err(Error::UnknownIdentifier { name, position }) => {
                assert_eq!(name, "y");
                assert_eq!(position, 4);
            }
            other => panic!("expected unknown identifier, got {other:?}"),
        }
        assert!(parse_expr("sin 3").is_err());
        assert!(parse_expr("(1").is_err());
        assert!(parse_expr("1 2").is_err());
        assert!(parse_expr("").is_err());
    }

    #[test]
    fn display_round_trip_examples() {
        for text in [
            "1 + 0.5*x",
            "-(x - 0.25)*(x - 0.75)",
            "2 + cos(3.141592653589793*x)/2",
            "exp(-x)/(1 + x*x)",
            "1 - -x",
            "(1 + x)/(2 - x)/(3 + x)",
        ] {
            let a = parse_expr(text).unwrap();
            let b = parse_expr(&a.to_string()).unwrap();
            for i in 0..=100 {
                let x = i as f64 / 100.0;
                let (va, vb) = (a.eval(x), b.eval(x));
                assert!(
                    (va - vb).abs() <= 1e-14 * va.abs().max(1.0),
                    "{text} -> {a}: {va} vs {vb} at x={x}"
                );
            }
        }
    }

    #[test]
    fn deep_nesting_is_rejected_not_overflowed() {
        let mut s = String::new();
        for _ in 0..5000 {
            s.push('(');
        }
        s.push('1');
        for _ in 0..5000 {
            s.push(')');
        }
        assert!(parse_expr(&s).is_err());
    }
}
