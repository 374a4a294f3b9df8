//! Recursive-descent parser for component lists.
//!
//! ```text
//! map     := '[' expr (',' | ';' expr)* ']' | expr (';' expr)*
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' '-'? INTEGER)?
//! primary := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'
//! ```

use super::ast::{Expr, UnaryFn, Var};
use crate::error::ExprError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>, ExprError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let end = tok == Tok::End;
            out.push((tok, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'[' => Some(Tok::LBracket),
            b']' => Some(Tok::RBracket),
            b',' => Some(Tok::Comma),
            b';' => Some(Tok::Semi),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((t, start));
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < bytes.len()
                && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
            {
                self.pos += 1;
            }
            return Ok((Tok::Ident(self.src[start..self.pos].to_string()), start));
        }
        Err(ExprError::Syntax {
            offset: start,
            message: format!("unexpected character `{}`", c as char),
        })
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), ExprError> {
        let bytes = self.src.as_bytes();
        let digits = |pos: &mut usize| {
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < bytes.len() && bytes[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let mut look = self.pos + 1;
            if look < bytes.len() && (bytes[look] == b'+' || bytes[look] == b'-') {
                look += 1;
            }
            if look < bytes.len() && bytes[look].is_ascii_digit() {
                self.pos = look;
                digits(&mut self.pos);
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>()
            .map(|v| (Tok::Num(v), start))
            .map_err(|_| ExprError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    arity_x: usize,
    arity_a: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn offset(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.syntax(format!("expected {what}"))
        }
    }

    fn map(&mut self) -> Result<Vec<Expr>, ExprError> {
        let mut comps = Vec::new();
        if *self.peek() == Tok::LBracket {
            self.bump();
            loop {
                comps.push(self.expr()?);
                match self.peek() {
                    Tok::Comma | Tok::Semi => {
                        self.bump();
                    }
                    Tok::RBracket => {
                        self.bump();
                        break;
                    }
                    _ => return self.syntax("expected `,` or `]`"),
                }
            }
        } else {
            loop {
                comps.push(self.expr()?);
                if *self.peek() == Tok::Semi {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        if *self.peek() != Tok::End {
            return self.syntax("unexpected trailing input");
        }
        Ok(comps)
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                self.bump();
                let k = v as i32;
                Ok(Expr::Pow(Box::new(base), if negative { -k } else { k }))
            }
            _ => self.syntax("exponent must be an integer literal"),
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(func) = UnaryFn::from_name(&name) {
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                self.variable(&name, offset)
            }
            Tok::End => Err(ExprError::Syntax {
                offset,
                message: "unexpected end of input".into(),
            }),
            other => Err(ExprError::Syntax {
                offset,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }

    fn variable(&self, name: &str, offset: usize) -> Result<Expr, ExprError> {
        let unknown = || ExprError::UnknownIdentifier {
            name: name.to_string(),
            offset,
        };
        let (kind, digits) = name.split_at(1);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(unknown());
        }
        let index: usize = digits.parse().map_err(|_| unknown())?;
        if index == 0 {
            return Err(unknown());
        }
        match kind {
            "x" if index <= self.arity_x => Ok(Expr::Var(Var::State(index - 1))),
            "a" if index <= self.arity_a => Ok(Expr::Var(Var::Param(index - 1))),
            "x" => Err(ExprError::Arity {
                what: "state variable index",
                expected: self.arity_x,
                found: index,
            }),
            "a" => Err(ExprError::Arity {
                what: "parameter index",
                expected: self.arity_a,
                found: index,
            }),
            _ => Err(unknown()),
        }
    }
}

/// Parses a component list over `x1..x{arity_x}` and `a1..a{arity_a}`.
pub fn parse_components(
    source: &str,
    arity_x: usize,
    arity_a: usize,
) -> Result<Vec<Expr>, ExprError> {
    let toks = Lexer::tokens(source)?;
    let mut p = Parser {
        toks,
        at: 0,
        arity_x,
        arity_a,
    };
    p.map()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_operator_reports_end_offset() {
        let err = parse_components("x1 +", 1, 0).unwrap_err();
        assert_eq!(
            err,
            ExprError::Syntax {
                offset: 4,
                message: "unexpected end of input".into()
            }
        );
    }

    #[test]
    fn unknown_identifiers_are_rejected() {
        assert!(matches!(
            parse_components("y1 + 1", 1, 0),
            Err(ExprError::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(
            parse_components("foo(x1)", 1, 0),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse_components("x0", 1, 0),
            Err(ExprError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn out_of_range_index_is_an_arity_error() {
        assert!(matches!(
            parse_components("x3", 2, 0),
            Err(ExprError::Arity { found: 3, .. })
        ));
        assert!(matches!(
            parse_components("a1", 1, 0),
            Err(ExprError::Arity { .. })
        ));
    }

    #[test]
    fn bracket_and_semicolon_lists() {
        assert_eq!(parse_components("[0, a1^2 - a2^2]", 3, 2).unwrap().len(), 2);
        assert_eq!(parse_components("x1; x2; x1*x2", 2, 0).unwrap().len(), 3);
        assert!(parse_components("[x1, ]", 1, 0).is_err());
        assert!(parse_components("[x1", 1, 0).is_err());
    }

    #[test]
    fn powers_take_integer_literals_only() {
        assert!(parse_components("x1^2.5", 1, 0).is_err());
        assert!(parse_components("x1^x1", 1, 0).is_err());
        assert_eq!(
            parse_components("x1^-2", 1, 0).unwrap()[0],
            Expr::Pow(Box::new(Expr::x(0)), -2)
        );
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = &parse_components("-x1^2", 1, 0).unwrap()[0];
        assert_eq!(
            *e,
            Expr::Neg(Box::new(Expr::Pow(Box::new(Expr::x(0)), 2)))
        );
    }

    #[test]
    fn scientific_literals() {
        let e = &parse_components("1.5e-3 * x1", 1, 0).unwrap()[0];
        assert_eq!(*e, Expr::Const(1.5e-3).mul(Expr::x(0)));
    }
}
