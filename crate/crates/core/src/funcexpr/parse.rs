use num_complex::Complex64;
use thiserror::Error;

use super::{add, div, exp, mul, neg, pow, sub, FnExpr, Node, NodeRef};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at offset {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

fn err<T>(position: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        position,
        message: message.into(),
    })
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    var: Option<(char, usize)>,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, ch: u8) -> bool {
        if self.peek() == Some(ch) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, ch: u8) -> Result<(), ParseError> {
        if self.eat(ch) {
            Ok(())
        } else {
            let found = self.describe_here();
            err(self.pos, format!("expected '{}', found {}", ch as char, found))
        }
    }

    fn describe_here(&mut self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(c) => format!("'{}'", c as char),
        }
    }

    fn expr(&mut self) -> Result<NodeRef, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = add(lhs, rhs);
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = sub(lhs, rhs);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<NodeRef, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.unary()?;
                lhs = mul(lhs, rhs);
            } else if self.peek() == Some(b'/') {
                self.pos += 1;
                self.skip_ws();
                let at = self.pos;
                let rhs = self.unary()?;
                if rhs.as_const() == Some(Complex64::new(0.0, 0.0)) {
                    return err(at, "division by zero");
                }
                lhs = div(lhs, rhs);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<NodeRef, ParseError> {
        if self.eat(b'-') {
            return Ok(neg(self.unary()?));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<NodeRef, ParseError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let at = {
            self.skip_ws();
            self.pos
        };
        let paren = self.eat(b'(');
        let k = self.integer()?;
        if paren {
            self.expect(b')')?;
        }
        if k < 0 && base.as_const() == Some(Complex64::new(0.0, 0.0)) {
            return err(at, "division by zero");
        }
        if self.peek() == Some(b'^') {
            return err(self.pos, "chained powers need parentheses");
        }
        Ok(pow(base, k))
    }

    fn integer(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let mut negative = false;
        if self.eat(b'-') {
            negative = true;
        } else {
            self.eat(b'+');
        }
        self.skip_ws();
        let digits_at = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_at {
            let found = self.describe_here();
            return err(self.pos, format!("expected integer exponent, found {found}"));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'.' | b'e' | b'E') {
            return err(self.pos, "exponent must be an integer");
        }
        let text = std::str::from_utf8(&self.src[digits_at..self.pos]).unwrap();
        let mag: i64 = match text.parse() {
            Ok(v) => v,
            Err(_) => return err(start, "exponent out of range"),
        };
        let v = if negative { -mag } else { mag };
        i32::try_from(v).or_else(|_| err(start, "exponent out of range"))
    }

    fn number(&mut self) -> Result<NodeRef, ParseError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
        }
        if i < s.len() && s[i] == b'.' {
            i += 1;
            while i < s.len() && s[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).unwrap();
        match text.parse::<f64>() {
            Ok(x) if x.is_finite() => {
                self.pos = i;
                Ok(Node::real(x))
            }
            _ => err(start, format!("malformed number '{text}'")),
        }
    }

    fn set_var(&mut self, v: char, at: usize) -> Result<(), ParseError> {
        match self.var {
            None => {
                self.var = Some((v, at));
                Ok(())
            }
            Some((w, _)) if w == v => Ok(()),
            Some((w, _)) => err(at, format!("expression mixes variables '{w}' and '{v}'")),
        }
    }

    fn atom(&mut self) -> Result<NodeRef, ParseError> {
        let at = {
            self.skip_ws();
            self.pos
        };
        let rest = &self.src[self.pos..];
        match rest.first().copied() {
            None => err(at, "unexpected end of input"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let mut j = 0;
                while j < rest.len() && rest[j].is_ascii_alphanumeric() {
                    j += 1;
                }
                let ident = std::str::from_utf8(&rest[..j]).unwrap();
                match ident {
                    "z" | "w" => {
                        self.set_var(ident.chars().next().unwrap(), at)?;
                        self.pos += 1;
                        Ok(Node::var())
                    }
                    "i" => {
                        self.pos += 1;
                        Ok(Node::constant(Complex64::new(0.0, 1.0)))
                    }
                    "exp" => {
                        self.pos += 3;
                        self.expect(b'(')?;
                        let e = self.expr()?;
                        self.expect(b')')?;
                        Ok(exp(e))
                    }
                    _ => err(at, format!("unknown identifier '{ident}'")),
                }
            }
            Some(c) => err(at, format!("unexpected character '{}'", c as char)),
        }
    }
}

/// Parse expression text in `z` (or `w`).
pub fn parse_fn(src: &str) -> Result<FnExpr, ParseError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        var: None,
    };
    if p.peek().is_none() {
        return err(0, "empty expression");
    }
    let root = p.expr()?;
    if let Some(c) = p.peek() {
        return err(p.pos, format!("unexpected '{}' after expression", c as char));
    }
    let var = p.var.map(|(v, _)| v).unwrap_or('z');
    Ok(FnExpr::new(root, var))
}
