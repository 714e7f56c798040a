//! Infix expression parser.
//!
//! Precedence, lowest first: `+ -`, `* /`, unary `-`, `^` (right
//! associative, also spelled `**`). `-x^2` therefore parses as `-(x^2)`.
//! Functions: `exp log ln sqrt abs sin cos tan` (one argument), `pow` (two),
//! `min max` (two or more). `pi` is a constant unless shadowed by a variable.

use thiserror::Error;

use super::expr::{BinaryOp, Expr, NaryOp, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("`{func}` expects {expected} argument(s), got {got}")]
    Arity {
        func: String,
        expected: String,
        got: usize,
    },
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("unexpected `{0}`")]
    UnexpectedToken(String),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("invalid number `{0}`")]
    InvalidNumber(String),
}

/// Parse failure with the byte offset of the offending token.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at position {position}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let s = &text[start..i];
            let v: f64 = s.parse().map_err(|_| ParseError {
                kind: ParseErrorKind::InvalidNumber(s.to_string()),
                position: start,
            })?;
            out.push((Tok::Num(v), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len()
                && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.')
            {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
            continue;
        }
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '*' if bytes.get(i + 1) == Some(&b'*') => {
                i += 1;
                Tok::Op('^')
            }
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            _ => {
                let ch = text[start..].chars().next().unwrap_or(c);
                return Err(ParseError {
                    kind: ParseErrorKind::UnexpectedToken(ch.to_string()),
                    position: start,
                });
            }
        };
        i += 1;
        out.push((tok, start));
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    vars: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.1).unwrap_or(self.end)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            position: self.here(),
        }
    }

    fn unexpected(&self) -> ParseError {
        match self.peek() {
            None => self.err(ParseErrorKind::UnexpectedEnd),
            Some(Tok::RParen) => self.err(ParseErrorKind::Unbalanced),
            Some(t) => self.err(ParseErrorKind::UnexpectedToken(tok_text(t))),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                let inner = self.unary()?;
                // Negative literals stay literals so printing round-trips.
                Ok(match inner {
                    Expr::Const(c) => Expr::Const(-c),
                    other => Expr::unary(UnaryOp::Neg, other),
                })
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::binary(BinaryOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let start = self.here();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    None => Err(ParseError {
                        kind: ParseErrorKind::Unbalanced,
                        position: start,
                    }),
                    Some(_) => Err(self.unexpected()),
                }
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(Tok::LParen) = self.peek() {
                    return self.call(&name, start);
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    Ok(Expr::Var(i))
                } else if name == "pi" {
                    Ok(Expr::Const(std::f64::consts::PI))
                } else {
                    Err(ParseError {
                        kind: ParseErrorKind::UnknownIdentifier(name),
                        position: start,
                    })
                }
            }
            _ => Err(self.unexpected()),
        }
    }

    fn call(&mut self, name: &str, start: usize) -> Result<Expr, ParseError> {
        let open = self.here();
        self.pos += 1;
        let mut args = Vec::new();
        if let Some(Tok::RParen) = self.peek() {
            self.pos += 1;
        } else {
            loop {
                args.push(self.expr()?);
                match self.peek() {
                    Some(Tok::Comma) => self.pos += 1,
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        break;
                    }
                    None => {
                        return Err(ParseError {
                            kind: ParseErrorKind::Unbalanced,
                            position: open,
                        })
                    }
                    Some(_) => return Err(self.unexpected()),
                }
            }
        }
        let arity = |expected: &str| ParseError {
            kind: ParseErrorKind::Arity {
                func: name.to_string(),
                expected: expected.to_string(),
                got: args.len(),
            },
            position: start,
        };
        if let Some(op) = UnaryOp::from_name(name) {
            if args.len() != 1 {
                return Err(arity("1"));
            }
            return Ok(Expr::unary(op, args.pop().unwrap()));
        }
        match name {
            "pow" => {
                if args.len() != 2 {
                    return Err(arity("2"));
                }
                let b = args.pop().unwrap();
                let a = args.pop().unwrap();
                Ok(Expr::binary(BinaryOp::Pow, a, b))
            }
            "min" | "max" => {
                if args.len() < 2 {
                    return Err(arity("at least 2"));
                }
                let op = if name == "min" { NaryOp::Min } else { NaryOp::Max };
                Ok(Expr::Nary(op, args))
            }
            _ => Err(ParseError {
                kind: ParseErrorKind::UnknownIdentifier(name.to_string()),
                position: start,
            }),
        }
    }
}

fn tok_text(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("{v}"),
        Tok::Ident(s) => s.clone(),
        Tok::Op(c) => c.to_string(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::Comma => ",".into(),
    }
}

/// Parses `text` with variables resolved by position in `vars`.
pub fn parse_expression(text: &str, vars: &[String]) -> Result<Expr, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        vars,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.unexpected());
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn precedence() {
        let v = names(&["x"]);
        let e = parse_expression("-x^2", &v).unwrap();
        assert_eq!(e.eval(&[3.0]).unwrap(), -9.0);
        let e = parse_expression("2^3^2", &v).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), 512.0);
        let e = parse_expression("1 - 2 - 3", &v).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), -4.0);
        let e = parse_expression("8 / 4 / 2", &v).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), 1.0);
        let e = parse_expression("x**-1", &v).unwrap();
        assert_eq!(e.eval(&[4.0]).unwrap(), 0.25);
        let e = parse_expression("1.5e-3*x + 2E2", &v).unwrap();
        assert!((e.eval(&[1000.0]).unwrap() - 201.5).abs() < 1e-12);
    }

    #[test]
    fn spec_examples() {
        let v = names(&["x1", "x2", "x6"]);
        let e = parse_expression("0.8*log(x2+1)", &v).unwrap();
        assert!(matches!(e, Expr::Binary(BinaryOp::Mul, _, _)));
        assert_eq!(e.eval(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        let e = parse_expression("x1 - x2", &v).unwrap();
        assert_eq!(e.eval(&[1.0, 1.0, 0.0]).unwrap(), 0.0);
        let e = parse_expression("110*x6^3", &v).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0, 2.0]).unwrap(), 880.0);
    }

    #[test]
    fn errors() {
        let v = names(&["x"]);
        let e = parse_expression("x + y", &v).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownIdentifier("y".into()));
        assert_eq!(e.position, 4);
        let e = parse_expression("log(x, x)", &v).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Arity { .. }));
        let e = parse_expression("max(x)", &v).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Arity { .. }));
        let e = parse_expression("(x + 1", &v).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Unbalanced);
        let e = parse_expression("x + 1)", &v).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Unbalanced);
        let e = parse_expression("x +", &v).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnexpectedEnd);
        let e = parse_expression("x $ 2", &v).unwrap_err();
        assert_eq!(e.position, 2);
    }

    #[test]
    fn render_round_trip_is_structural() {
        let v = names(&["a", "b"]);
        for text in [
            "-3*a + b^-2",
            "min(a, b, -0.5) - max(a, 1e-7)",
            "sqrt((745*a/(b))^2 + 16.9e6)",
            "-(a - b)",
            "-2^2",
        ] {
            let e = parse_expression(text, &v).unwrap();
            let back = parse_expression(&e.render(&v), &v).unwrap();
            assert_eq!(back, e, "{text}");
        }
    }
}
