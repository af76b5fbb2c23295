//! Text input for forms: sums of products of numbers, `t`, `x`, `y`,
//! parentheses and integer powers.
//!
//! Juxtaposition multiplies (`2x^2 y`, `t(x + y)`), `^` and `**` are powers,
//! and `/` divides by a constant, so `1/19*(...)` works. The result must be
//! homogeneous.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::ternary::TernaryForm;

/// Sparse polynomial, not necessarily homogeneous.
type Poly = BTreeMap<[u32; 3], f64>;

fn constant(c: f64) -> Poly {
    Poly::from([([0, 0, 0], c)])
}

fn add(mut a: Poly, b: &Poly, sign: f64) -> Poly {
    for (e, c) in b {
        *a.entry(*e).or_insert(0.0) += sign * c;
    }
    a
}

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
            *out.entry(e).or_insert(0.0) += ca * cb;
        }
    }
    out
}

fn as_constant(p: &Poly) -> Option<f64> {
    p.iter()
        .filter(|(_, c)| **c != 0.0)
        .try_fold(0.0, |_, (e, c)| (*e == [0, 0, 0]).then_some(*c))
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    at: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.char_indices().collect(),
            at: 0,
            src,
        }
    }

    fn pos(&self) -> usize {
        self.chars.get(self.at).map_or(self.src.len(), |c| c.0)
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.at).is_some_and(|c| c.1.is_whitespace()) {
            self.at += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.at).map(|c| c.1)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        self.at += 1;
        c
    }

    fn is_minus(c: char) -> bool {
        c == '-' || c == '\u{2212}'
    }

    fn expr(&mut self) -> Result<Poly> {
        let mut acc = Poly::new();
        let mut sign = 1.0;
        match self.peek() {
            Some('+') => {
                self.bump();
            }
            Some(c) if Self::is_minus(c) => {
                self.bump();
                sign = -1.0;
            }
            _ => {}
        }
        loop {
            let t = self.term()?;
            acc = add(acc, &t, sign);
            match self.peek() {
                Some('+') => sign = 1.0,
                Some(c) if Self::is_minus(c) => sign = -1.0,
                _ => return Ok(acc),
            }
            self.bump();
        }
    }

    /// Starts a factor: a number, a variable or a parenthesis.
    fn starts_factor(c: char) -> bool {
        c.is_ascii_digit() || c == '.' || c == '(' || matches!(c, 't' | 'x' | 'y')
    }

    fn term(&mut self) -> Result<Poly> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some('*') if self.chars.get(self.at + 1).map(|c| c.1) != Some('*') => {
                    self.bump();
                    acc = mul(&acc, &self.power()?);
                }
                Some('/') => {
                    self.bump();
                    self.skip_ws();
                    let at = self.pos();
                    let den = self.power()?;
                    match as_constant(&den) {
                        Some(c) if c != 0.0 => acc = mul(&acc, &constant(1.0 / c)),
                        _ => {
                            return Err(Error::Parse {
                                pos: at,
                                msg: "can only divide by a non-zero constant".into(),
                            })
                        }
                    }
                }
                Some(c) if Self::starts_factor(c) => acc = mul(&acc, &self.power()?),
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> Result<Poly> {
        let base = self.factor()?;
        let caret = match self.peek() {
            Some('^') => 1,
            Some('*') if self.chars.get(self.at + 1).map(|c| c.1) == Some('*') => 2,
            _ => return Ok(base),
        };
        for _ in 0..caret {
            self.bump();
        }
        self.skip_ws();
        let start = self.at;
        while self.chars.get(self.at).is_some_and(|c| c.1.is_ascii_digit()) {
            self.at += 1;
        }
        if start == self.at {
            return self.error("expected a non-negative integer exponent");
        }
        let digits: String = self.chars[start..self.at].iter().map(|c| c.1).collect();
        let n: u32 = match digits.parse() {
            Ok(n) if n <= 64 => n,
            _ => return self.error("exponent too large"),
        };
        Ok((0..n).fold(constant(1.0), |acc, _| mul(&acc, &base)))
    }

    fn factor(&mut self) -> Result<Poly> {
        match self.peek() {
            None => self.error("unexpected end of input"),
            Some('(') => {
                self.bump();
                let inner = self.expr()?;
                if self.bump() != Some(')') {
                    self.at -= 1;
                    return self.error("expected ')'");
                }
                Ok(inner)
            }
            Some(c) if Self::is_minus(c) => {
                self.bump();
                Ok(add(Poly::new(), &self.power()?, -1.0))
            }
            Some('+') => {
                self.bump();
                self.power()
            }
            Some(v @ ('t' | 'x' | 'y')) => {
                self.bump();
                let mut e = [0, 0, 0];
                e[match v {
                    't' => 0,
                    'x' => 1,
                    _ => 2,
                }] = 1;
                Ok(Poly::from([(e, 1.0)]))
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) => self.error(format!("unexpected character '{c}'")),
        }
    }

    fn number(&mut self) -> Result<Poly> {
        let start = self.at;
        let digit = |p: &Self| p.chars.get(p.at).is_some_and(|c| c.1.is_ascii_digit());
        while digit(self) {
            self.at += 1;
        }
        if self.chars.get(self.at).is_some_and(|c| c.1 == '.') {
            self.at += 1;
            while digit(self) {
                self.at += 1;
            }
        }
        if self.chars.get(self.at).is_some_and(|c| c.1 == 'e' || c.1 == 'E') {
            let mark = self.at;
            self.at += 1;
            if self.chars.get(self.at).is_some_and(|c| c.1 == '+' || c.1 == '-') {
                self.at += 1;
            }
            if digit(self) {
                while digit(self) {
                    self.at += 1;
                }
            } else {
                self.at = mark;
            }
        }
        let text: String = self.chars[start..self.at].iter().map(|c| c.1).collect();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(constant(v)),
            _ => {
                self.at = start;
                self.error(format!("bad number '{text}'"))
            }
        }
    }
}

/// Parses a homogeneous form in `t, x, y`.
pub fn parse_polynomial_text(src: &str) -> Result<TernaryForm> {
    let mut p = Parser::new(src);
    let poly = p.expr()?;
    if p.peek().is_some() {
        return p.error("unexpected trailing input");
    }
    let terms: Vec<_> = poly.into_iter().filter(|(_, c)| *c != 0.0).collect();
    let Some(degree) = terms.first().map(|(e, _)| e.iter().sum::<u32>()) else {
        return Err(Error::Parse {
            pos: 0,
            msg: "the zero polynomial has no degree".into(),
        });
    };
    if terms.iter().any(|(e, _)| e.iter().sum::<u32>() != degree) {
        return Err(Error::InhomogeneousInput);
    }
    TernaryForm::from_terms(degree as usize, terms.into_iter().map(|(e, c)| (e, C64::new(c, 0.0))))
}
