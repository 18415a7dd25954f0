//! Textual form of [`MomentPoly`]: canonical printing and exact parsing.
//!
//! Coefficients print as `num` or `num/den`, symbols as `q`, `p`, `hbar`,
//! `E`, `i`, and moments as `G[a,b]` / `C[a,b]`. Printing a canonical
//! polynomial and parsing the result is bit-exact.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use super::{MomentKey, MomentKind, Monomial, MomentPoly};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

fn rational_str(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn push_power(out: &mut Vec<String>, name: &str, pow: u32) {
    match pow {
        0 => {}
        1 => out.push(name.to_string()),
        _ => out.push(format!("{}^{}", name, pow)),
    }
}

fn monomial_factors(mono: &Monomial) -> Vec<String> {
    let mut factors = Vec::new();
    push_power(&mut factors, "q", mono.q_pow);
    push_power(&mut factors, "p", mono.p_pow);
    push_power(&mut factors, "hbar", mono.hbar_pow);
    push_power(&mut factors, "E", mono.energy_pow);
    if mono.i_pow == 1 {
        factors.push("i".to_string());
    }
    let mut idx = 0;
    while idx < mono.keys.len() {
        let key = mono.keys[idx];
        let mut mult = 1;
        while idx + mult < mono.keys.len() && mono.keys[idx + mult] == key {
            mult += 1;
        }
        push_power(&mut factors, &key.to_string(), mult as u32);
        idx += mult;
    }
    factors
}

impl fmt::Display for MomentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (idx, (mono, coeff)) in self.terms().enumerate() {
            let negative = coeff.is_negative();
            if idx == 0 {
                if negative {
                    f.write_str("-")?;
                }
            } else if negative {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            let magnitude = coeff.abs();
            let factors = monomial_factors(mono);
            if factors.is_empty() {
                f.write_str(&rational_str(&magnitude))?;
            } else {
                let mut parts = Vec::new();
                if !magnitude.is_one() {
                    parts.push(rational_str(&magnitude));
                }
                parts.extend(factors);
                f.write_str(&parts.join("*"))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Number(BigRational),
    Symbol(Symbol),
    Caret,
    Star,
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symbol {
    Q,
    P,
    Hbar,
    Energy,
    Imag,
    Key(MomentKey),
}

struct Lexer<'a> {
    input: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(input: &'a str) -> Self {
        Self { input: input.as_bytes(), pos: 0 }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { position: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn integer(&mut self) -> Result<BigInt, ParseError> {
        let start = self.pos;
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected digits"));
        }
        let text = std::str::from_utf8(&self.input[start..self.pos]).unwrap();
        Ok(BigInt::from_str(text).unwrap())
    }

    fn moment_key(&mut self, kind: MomentKind) -> Result<MomentKey, ParseError> {
        // letter already consumed; expect [a,b]
        if self.pos >= self.input.len() || self.input[self.pos] != b'[' {
            return Err(self.error("expected `[` after moment letter"));
        }
        self.pos += 1;
        let a = self.integer()?;
        if self.pos >= self.input.len() || self.input[self.pos] != b',' {
            return Err(self.error("expected `,` in moment index"));
        }
        self.pos += 1;
        let b = self.integer()?;
        if self.pos >= self.input.len() || self.input[self.pos] != b']' {
            return Err(self.error("expected `]` closing moment index"));
        }
        self.pos += 1;
        use num_traits::ToPrimitive;
        let a = a.to_u32().ok_or_else(|| self.error("moment index out of range"))?;
        let b = b.to_u32().ok_or_else(|| self.error("moment index out of range"))?;
        Ok(MomentKey::new(kind, a, b))
    }

    fn next_token(&mut self) -> Result<Option<Token>, ParseError> {
        self.skip_ws();
        if self.pos >= self.input.len() {
            return Ok(None);
        }
        let c = self.input[self.pos];
        let token = match c {
            b'+' => {
                self.pos += 1;
                Token::Plus
            }
            b'-' => {
                self.pos += 1;
                Token::Minus
            }
            b'*' => {
                self.pos += 1;
                Token::Star
            }
            b'^' => {
                self.pos += 1;
                Token::Caret
            }
            b'0'..=b'9' => {
                let numer = self.integer()?;
                if self.pos < self.input.len() && self.input[self.pos] == b'/' {
                    self.pos += 1;
                    let denom = self.integer()?;
                    if denom.is_zero() {
                        return Err(self.error("zero denominator"));
                    }
                    Token::Number(BigRational::new(numer, denom))
                } else {
                    Token::Number(BigRational::from_integer(numer))
                }
            }
            b'G' => {
                self.pos += 1;
                Token::Symbol(Symbol::Key(self.moment_key(MomentKind::Quantum)?))
            }
            b'C' => {
                self.pos += 1;
                Token::Symbol(Symbol::Key(self.moment_key(MomentKind::Classical)?))
            }
            b'E' => {
                self.pos += 1;
                Token::Symbol(Symbol::Energy)
            }
            b'q' => {
                self.pos += 1;
                Token::Symbol(Symbol::Q)
            }
            b'p' => {
                self.pos += 1;
                Token::Symbol(Symbol::P)
            }
            b'i' => {
                self.pos += 1;
                Token::Symbol(Symbol::Imag)
            }
            b'h' => {
                if self.input[self.pos..].starts_with(b"hbar") {
                    self.pos += 4;
                    Token::Symbol(Symbol::Hbar)
                } else {
                    return Err(self.error("unknown symbol starting with `h`"));
                }
            }
            other => {
                return Err(self.error(format!("unexpected character `{}`", other as char)));
            }
        };
        Ok(Some(token))
    }
}

fn lex(input: &str) -> Result<Vec<Token>, ParseError> {
    let mut lexer = Lexer::new(input);
    let mut tokens = Vec::new();
    while let Some(token) = lexer.next_token()? {
        tokens.push(token);
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { position: self.pos, message: message.into() }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn exponent(&mut self) -> Result<u32, ParseError> {
        // caret already seen
        self.pos += 1;
        match self.tokens.get(self.pos) {
            Some(Token::Number(n)) if n.is_integer() && !n.is_negative() => {
                use num_traits::ToPrimitive;
                let value =
                    n.numer().to_u32().ok_or_else(|| self.error("exponent out of range"))?;
                self.pos += 1;
                Ok(value)
            }
            _ => Err(self.error("expected non-negative integer exponent")),
        }
    }

    fn factor(&mut self) -> Result<MomentPoly, ParseError> {
        let base = match self.peek() {
            Some(Token::Number(n)) => {
                let poly = MomentPoly::from_rational(n.clone());
                self.pos += 1;
                poly
            }
            Some(Token::Symbol(sym)) => {
                let poly = match sym {
                    Symbol::Q => MomentPoly::q(),
                    Symbol::P => MomentPoly::p(),
                    Symbol::Hbar => MomentPoly::hbar(),
                    Symbol::Energy => MomentPoly::energy(),
                    Symbol::Imag => MomentPoly::imaginary_unit(),
                    Symbol::Key(key) => MomentPoly::moment(*key),
                };
                self.pos += 1;
                poly
            }
            _ => return Err(self.error("expected number or symbol")),
        };
        if matches!(self.peek(), Some(Token::Caret)) {
            let exp = self.exponent()?;
            Ok(base.pow(exp))
        } else {
            Ok(base)
        }
    }

    fn term(&mut self) -> Result<MomentPoly, ParseError> {
        let mut product = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    let next = self.factor()?;
                    product = &product * &next;
                }
                // Adjacent factors without `*` (e.g. `2hbar`) are accepted.
                Some(Token::Number(_)) | Some(Token::Symbol(_)) => {
                    let next = self.factor()?;
                    product = &product * &next;
                }
                _ => break,
            }
        }
        Ok(product)
    }

    fn poly(&mut self) -> Result<MomentPoly, ParseError> {
        let mut negate = false;
        match self.peek() {
            Some(Token::Minus) => {
                negate = true;
                self.pos += 1;
            }
            Some(Token::Plus) => {
                self.pos += 1;
            }
            _ => {}
        }
        let first = self.term()?;
        let mut total = if negate { -&first } else { first };
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    let next = self.term()?;
                    total += &next;
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    let next = self.term()?;
                    total -= &next;
                }
                None => break,
                Some(_) => return Err(self.error("expected `+` or `-` between terms")),
            }
        }
        Ok(total)
    }
}

impl FromStr for MomentPoly {
    type Err = ParseError;

    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let trimmed = input.trim();
        if trimmed == "0" {
            return Ok(MomentPoly::zero());
        }
        let tokens = lex(trimmed)?;
        if tokens.is_empty() {
            return Err(ParseError { position: 0, message: "empty input".into() });
        }
        let mut parser = Parser { tokens, pos: 0 };
        parser.poly()
    }
}

impl MomentPoly {
    pub fn parse(input: &str) -> Result<Self, ParseError> {
        input.parse()
    }
}
