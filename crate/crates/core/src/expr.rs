//! A small expression language for coefficient densities.
//!
//! Grammar (usual precedence, `^` right-associative and binding tighter than
//! unary minus):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'x' | 'i' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | log | atan | sqrt | step
//! ```
//!
//! `step` is the Heaviside function (`1/2` at the jump). Values are complex
//! throughout; `i` is the imaginary unit.

use std::fmt;

use thiserror::Error;

use crate::linalg::{C64, I, ZERO};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("domain error in {what} at x = {x}")]
    Domain { what: String, x: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Atan,
    Sqrt,
    Step,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "atan" => Func::Atan,
            "sqrt" => Func::Sqrt,
            "step" => Func::Step,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Atan => "atan",
            Func::Sqrt => "sqrt",
            Func::Step => "step",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(C64),
    X,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Num(ZERO)
    }

    pub fn constant(z: C64) -> Expr {
        Expr::Num(z)
    }

    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        parse_expr(text)
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::X => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Bin(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// The value of an `x`-free expression, if it evaluates cleanly.
    pub fn constant_value(&self) -> Option<C64> {
        if self.is_constant() {
            self.eval(0.0).ok()
        } else {
            None
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant_value() == Some(ZERO)
    }

    /// Collapses every `x`-free subtree into a literal.
    pub fn fold_constants(&self) -> Expr {
        if let Some(v) = self.constant_value() {
            return Expr::Num(v);
        }
        match self {
            Expr::Num(_) | Expr::X => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.fold_constants())),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.fold_constants())),
            Expr::Bin(op, a, b) => Expr::Bin(
                *op,
                Box::new(a.fold_constants()),
                Box::new(b.fold_constants()),
            ),
        }
    }

    pub fn eval(&self, x: f64) -> Result<C64, ExprError> {
        let v = match self {
            Expr::Num(z) => *z,
            Expr::X => C64::from(x),
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x)?, b.eval(x)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == ZERO {
                            return Err(domain("division by zero", x));
                        }
                        a / b
                    }
                    BinOp::Pow => power(a, b, x)?,
                }
            }
            Expr::Call(f, a) => {
                let a = a.eval(x)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a.im == 0.0 && a.re <= 0.0 {
                            return Err(domain("log of a non-positive real", x));
                        }
                        a.ln()
                    }
                    Func::Atan => {
                        if a.re == 0.0 && a.im.abs() == 1.0 {
                            return Err(domain("atan at a branch point", x));
                        }
                        a.atan()
                    }
                    Func::Sqrt => a.sqrt(),
                    Func::Step => {
                        if a.im != 0.0 {
                            return Err(domain("step of a non-real argument", x));
                        }
                        C64::from(if a.re > 0.0 {
                            1.0
                        } else if a.re < 0.0 {
                            0.0
                        } else {
                            0.5
                        })
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(domain("non-finite value", x))
        }
    }
}

fn domain(what: &str, x: f64) -> ExprError {
    ExprError::Domain {
        what: what.to_string(),
        x,
    }
}

fn power(base: C64, exponent: C64, x: f64) -> Result<C64, ExprError> {
    if exponent.im == 0.0 && exponent.re.fract() == 0.0 && exponent.re.abs() <= 64.0 {
        let n = exponent.re as i32;
        if base == ZERO && n < 0 {
            return Err(domain("zero to a negative power", x));
        }
        return Ok(base.powi(n));
    }
    if base == ZERO {
        return if exponent.re > 0.0 {
            Ok(ZERO)
        } else {
            Err(domain("zero to a non-positive power", x))
        };
    }
    Ok((exponent * base.ln()).exp())
}

impl fmt::Display for Expr {
    /// Fully parenthesized output that re-parses to an equivalent tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(z) => {
                if z.im == 0.0 {
                    write!(f, "({:?})", z.re)
                } else {
                    write!(f, "({:?}+{:?}*i)", z.re, z.im)
                }
            }
            Expr::X => write!(f, "x"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a}{sym}{b})")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i] as char;
        if ch.is_ascii_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // Exponent only when followed by digits, so `2*e` style stays unambiguous.
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
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| ExprError::Syntax {
                pos: start,
                message: format!("malformed number `{lit}`"),
            })?;
            out.push((Tok::Num(v), start));
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else {
            let tok = match ch {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(ch),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(ExprError::Syntax {
                        pos: i,
                        message: format!("unexpected character `{ch}`"),
                    })
                }
            };
            out.push((tok, i));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn syntax(&self, message: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            pos: self.here(),
            message: message.into(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let Some((tok, at)) = self.toks.get(self.pos).cloned() else {
            return Err(self.syntax("unexpected end of input"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(C64::from(v))),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::X),
                "i" => Ok(Expr::Num(I)),
                "pi" => Ok(Expr::Num(C64::from(std::f64::consts::PI))),
                "e" => Ok(Expr::Num(C64::from(std::f64::consts::E))),
                _ => {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(ExprError::UnknownIdentifier { name, pos: at });
                    };
                    if self.peek() != Some(&Tok::LParen) {
                        return Err(self.syntax(format!("expected `(` after `{name}`")));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::Call(func, Box::new(arg)))
                }
            },
            Tok::RParen => Err(ExprError::Syntax {
                pos: at,
                message: "unexpected `)`".into(),
            }),
            Tok::Op(c) => Err(ExprError::Syntax {
                pos: at,
                message: format!("unexpected operator `{c}`"),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.syntax("expected `)`")),
        }
    }
}

pub fn parse_expr(text: &str) -> Result<Expr, ExprError> {
    if text.trim().is_empty() {
        return Err(ExprError::Empty);
    }
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.syntax("trailing input"));
    }
    Ok(e)
}

pub fn eval_expr(e: &Expr, x: f64) -> Result<C64, ExprError> {
    e.eval(x)
}

/// Convenience for tests and catalog construction; panics on malformed input.
pub(crate) fn expr(text: &str) -> Expr {
    parse_expr(text).unwrap_or_else(|e| panic!("bad built-in expression `{text}`: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use proptest::prelude::*;

    fn at(text: &str, x: f64) -> C64 {
        parse_expr(text).unwrap().eval(x).unwrap()
    }

    #[test]
    fn spec_examples() {
        assert!((at("sin(pi/2)", 0.3) - ONE).norm() < 1e-15);
        assert_eq!(at("1+1/(x^2+1)", 1.0), C64::from(1.5));
        assert_eq!(at("exp(2*i*x)", 0.0), ONE);
        assert_eq!(at("x", 2.0), C64::from(2.0));
        assert_eq!(at("atan(x)", 0.0), ZERO);
        assert_eq!(at("1+1/(x^2+1)", 0.0), C64::from(2.0));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(at("2^3^2", 0.0), C64::from(512.0));
        assert_eq!(at("-2^2", 0.0), C64::from(-4.0));
        assert_eq!(at("8/4/2", 0.0), C64::from(1.0));
        assert_eq!(at("1-2-3", 0.0), C64::from(-4.0));
        assert_eq!(at("2*e", 0.0), C64::from(2.0 * std::f64::consts::E));
        assert_eq!(at("1.5e2", 0.0), C64::from(150.0));
        assert_eq!(at("(1+i)*(1-i)", 0.0), C64::from(2.0));
    }

    #[test]
    fn step_function() {
        assert_eq!(at("step(x-1)", 0.5), ZERO);
        assert_eq!(at("step(x-1)", 1.0), C64::from(0.5));
        assert_eq!(at("step(x-1)", 2.0), ONE);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_expr("1 + * 2") {
            Err(ExprError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        match parse_expr("foo(x)") {
            Err(ExprError::UnknownIdentifier { name, pos }) => {
                assert_eq!(name, "foo");
                assert_eq!(pos, 0);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_expr("(1+x"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse_expr("1 2"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse_expr("  "), Err(ExprError::Empty)));
        assert!(matches!(
            parse_expr("1 $ 2"),
            Err(ExprError::Syntax { pos: 2, .. })
        ));
    }

    #[test]
    fn domain_errors() {
        let e = parse_expr("log(x)").unwrap();
        assert!(matches!(e.eval(0.0), Err(ExprError::Domain { .. })));
        assert!(matches!(e.eval(-1.0), Err(ExprError::Domain { .. })));
        assert!(e.eval(2.0).is_ok());
        let e = parse_expr("1/x").unwrap();
        assert!(matches!(e.eval(0.0), Err(ExprError::Domain { .. })));
        let e = parse_expr("exp(x)").unwrap();
        assert!(matches!(e.eval(1000.0), Err(ExprError::Domain { .. })));
    }

    #[test]
    fn constant_folding() {
        let e = parse_expr("2*pi + x*(1+1)").unwrap().fold_constants();
        match &e {
            Expr::Bin(BinOp::Add, a, _) => assert!(matches!(**a, Expr::Num(_))),
            other => panic!("{other:?}"),
        }
        assert!(
            (e.eval(1.0).unwrap() - C64::from(2.0 * std::f64::consts::PI + 2.0)).norm() < 1e-14
        );
        assert!(parse_expr("0*1").unwrap().is_zero());
    }

    fn arb_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            Just("x".to_string()),
            Just("i".to_string()),
            Just("pi".to_string()),
            (-5.0f64..5.0).prop_map(|v| format!("{v:.3}")),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (
                    inner.clone(),
                    inner.clone(),
                    prop_oneof![Just('+'), Just('-'), Just('*')]
                )
                    .prop_map(|(a, b, op)| format!("({a}){op}({b})")),
                inner.clone().prop_map(|a| format!("sin({a})")),
                inner.clone().prop_map(|a| format!("atan({a})")),
                inner.clone().prop_map(|a| format!("-({a})")),
                inner.prop_map(|a| format!("({a})^2")),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_reparse_evaluates_identically(text in arb_expr()) {
            let e = parse_expr(&text).unwrap();
            let again = parse_expr(&e.to_string()).unwrap();
            for k in 0..10 {
                let x = 0.1 + 0.37 * k as f64;
                match (e.eval(x), again.eval(x)) {
                    (Ok(a), Ok(b)) => prop_assert!(a == b, "{} vs {} at {}", a, b, x),
                    (Err(_), Err(_)) => {}
                    (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
                }
            }
        }
    }
}
