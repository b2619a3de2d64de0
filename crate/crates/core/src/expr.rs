//! Small arithmetic expression language with exact symbolic derivatives.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?        right-associative, constant exponent
//! primary := number | ident | ident '(' expr ')' | '(' expr ')'
//! number  := digits ['.' digits] [('e' | 'E') ['+' | '-'] digits]
//! ident   := letter (letter | digit | '_')*
//! ```
//!
//! Functions: `sin`, `cos`, `exp`, `sqrt`. The exponent of `^` must fold to a
//! constant real at parse time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Environment {
    vars: BTreeMap<String, f64>,
}

impl Environment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.vars.insert(name.into(), value);
        self
    }

    pub fn with(mut self, name: impl Into<String>, value: f64) -> Self {
        self.bind(name, value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.vars.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.vars.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for Environment {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        let mut env = Environment::new();
        for (k, v) in iter {
            env.bind(k, v);
        }
        env
    }
}

/// Anything that can resolve a variable name to a value.
pub trait Bindings {
    fn lookup(&self, name: &str) -> Option<f64>;
}

impl Bindings for Environment {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name)
    }
}

/// A local binding layered over another set of bindings.
pub struct Layered<'a, S: AsRef<str>, B: Bindings + ?Sized> {
    pub names: &'a [S],
    pub values: &'a [f64],
    pub base: &'a B,
}

impl<S: AsRef<str>, B: Bindings + ?Sized> Bindings for Layered<'_, S, B> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n.as_ref() == name)
            .map(|i| self.values[i])
            .or_else(|| self.base.lookup(name))
    }
}

// ---------------------------------------------------------------------------
// Lexer

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
    End,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            out.push((t, col));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ExprError::Syntax {
                    column: col,
                    message: format!("malformed number `{s}`"),
                })?;
            out.push((Tok::Num(v), col));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        return Err(ExprError::Syntax {
            column: col,
            message: format!("unexpected character `{c}`"),
        });
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn column(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            column: self.column(),
            message: message.into(),
        })
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
        let col = self.column();
        let exponent = self.unary()?;
        match exponent.constant_value() {
            Some(k) if k.is_finite() => Ok(Expr::Pow(Box::new(base), k)),
            _ => Err(ExprError::Syntax {
                column: col,
                message: "exponent must be a constant real".into(),
            }),
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Ident(name) => {
                let col = self.column();
                self.bump();
                if *self.peek() == Tok::LParen {
                    let Some(f) = Func::from_name(&name) else {
                        return Err(ExprError::Syntax {
                            column: col,
                            message: format!("unknown function `{name}`"),
                        });
                    };
                    self.bump();
                    let arg = self.expr()?;
                    if *self.peek() != Tok::RParen {
                        return self.error("expected `)`");
                    }
                    self.bump();
                    Ok(Expr::Call(f, Box::new(arg)))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return self.error("expected `)`");
                }
                self.bump();
                Ok(e)
            }
            Tok::End => self.error("unexpected end of input"),
            t => self.error(format!("unexpected token {t:?}")),
        }
    }
}

/// Parses `text` into an expression tree.
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.error(format!("unexpected token {:?}", p.peek()));
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

// ---------------------------------------------------------------------------
// Evaluation

fn pow(base: f64, k: f64) -> f64 {
    if k == 2.0 {
        base * base
    } else if k.fract() == 0.0 && k.abs() <= i32::MAX as f64 {
        base.powi(k as i32)
    } else {
        base.powf(k)
    }
}

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    /// Evaluates under `env`, reporting unbound names and domain errors.
    pub fn eval<B: Bindings + ?Sized>(&self, env: &B) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(name) => env
                .lookup(name)
                .ok_or_else(|| ExprError::UnboundVariable(name.clone()))?,
            Expr::Neg(a) => -a.eval(env)?,
            Expr::Add(a, b) => a.eval(env)? + b.eval(env)?,
            Expr::Sub(a, b) => a.eval(env)? - b.eval(env)?,
            Expr::Mul(a, b) => a.eval(env)? * b.eval(env)?,
            Expr::Div(a, b) => {
                let num = a.eval(env)?;
                let den = b.eval(env)?;
                if den == 0.0 {
                    return Err(ExprError::Domain("division by zero".into()));
                }
                num / den
            }
            Expr::Pow(a, k) => {
                let base = a.eval(env)?;
                if base == 0.0 && *k < 0.0 {
                    return Err(ExprError::Domain("zero raised to a negative power".into()));
                }
                if base < 0.0 && k.fract() != 0.0 {
                    return Err(ExprError::Domain(format!(
                        "negative base {base} raised to non-integer power {k}"
                    )));
                }
                pow(base, *k)
            }
            Expr::Call(f, a) => {
                let x = a.eval(env)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(ExprError::Domain(format!("sqrt of negative value {x}")));
                        }
                        x.sqrt()
                    }
                }
            }
        })
    }

    /// Value of a closed expression, if it has no variables and evaluates.
    pub fn constant_value(&self) -> Option<f64> {
        if self.is_closed() {
            self.eval(&Environment::new()).ok()
        } else {
            None
        }
    }

    fn is_closed(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.is_closed(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_closed() && b.is_closed()
            }
        }
    }

    /// Names of all free variables.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Replaces every occurrence of variable `name` with `with`.
    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        match self {
            Expr::Num(_) => self.clone(),
            Expr::Var(n) if n == name => with.clone(),
            Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(name, with))),
            Expr::Pow(a, k) => Expr::Pow(Box::new(a.substitute(name, with)), *k),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.substitute(name, with))),
            Expr::Add(a, b) => Expr::Add(Box::new(a.substitute(name, with)), Box::new(b.substitute(name, with))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.substitute(name, with)), Box::new(b.substitute(name, with))),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.substitute(name, with)), Box::new(b.substitute(name, with))),
            Expr::Div(a, b) => Expr::Div(Box::new(a.substitute(name, with)), Box::new(b.substitute(name, with))),
        }
    }

    /// Exact derivative with respect to `var`, simplified only by constant
    /// folding and identity elimination.
    pub fn differentiate(&self, var: &str) -> Expr {
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(n) => Expr::Num(if n == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.differentiate(var)),
            Expr::Add(a, b) => add(a.differentiate(var), b.differentiate(var)),
            Expr::Sub(a, b) => sub(a.differentiate(var), b.differentiate(var)),
            Expr::Mul(a, b) => add(
                mul(a.differentiate(var), (**b).clone()),
                mul((**a).clone(), b.differentiate(var)),
            ),
            Expr::Div(a, b) => {
                // (a'b - ab') / b^2
                let num = sub(
                    mul(a.differentiate(var), (**b).clone()),
                    mul((**a).clone(), b.differentiate(var)),
                );
                div(num, powk((**b).clone(), 2.0))
            }
            Expr::Pow(a, k) => mul(
                mul(Expr::Num(*k), powk((**a).clone(), k - 1.0)),
                a.differentiate(var),
            ),
            Expr::Call(f, a) => {
                let inner = a.differentiate(var);
                let outer = match f {
                    Func::Sin => call(Func::Cos, (**a).clone()),
                    Func::Cos => neg(call(Func::Sin, (**a).clone())),
                    Func::Exp => call(Func::Exp, (**a).clone()),
                    Func::Sqrt => {
                        return div(inner, mul(Expr::Num(2.0), call(Func::Sqrt, (**a).clone())));
                    }
                };
                mul(outer, inner)
            }
        }
    }

    /// Canonical fully parenthesized text; parsing it back evaluates
    /// bit-identically.
    pub fn serialize(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{})", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(n) => write!(f, "{n}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, k) => {
                if *k < 0.0 {
                    write!(f, "({a} ^ (-{}))", -k)
                } else {
                    write!(f, "({a} ^ {k})")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

// Smart constructors used by differentiation: constant folding plus the
// identities 0+x, x+0, x-0, 0*x, 1*x, x*1, x/1, x^1, x^0, -(-x).

fn fold(e: Expr) -> Expr {
    match e.constant_value() {
        Some(v) if v.is_finite() && !matches!(e, Expr::Num(_)) => Expr::Num(v),
        _ => e,
    }
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        return b;
    }
    if is_num(&b, 0.0) {
        return a;
    }
    fold(Expr::Add(Box::new(a), Box::new(b)))
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 0.0) {
        return a;
    }
    if is_num(&a, 0.0) {
        return neg(b);
    }
    fold(Expr::Sub(Box::new(a), Box::new(b)))
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        return Expr::Num(0.0);
    }
    if is_num(&a, 1.0) {
        return b;
    }
    if is_num(&b, 1.0) {
        return a;
    }
    fold(Expr::Mul(Box::new(a), Box::new(b)))
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 1.0) {
        return a;
    }
    if is_num(&a, 0.0) {
        return Expr::Num(0.0);
    }
    fold(Expr::Div(Box::new(a), Box::new(b)))
}

fn powk(a: Expr, k: f64) -> Expr {
    if k == 1.0 {
        return a;
    }
    if k == 0.0 {
        return Expr::Num(1.0);
    }
    fold(Expr::Pow(Box::new(a), k))
}

fn call(f: Func, a: Expr) -> Expr {
    fold(Expr::Call(f, Box::new(a)))
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn env(pairs: &[(&str, f64)]) -> Environment {
        pairs.iter().map(|(k, v)| (*k, *v)).collect()
    }

    #[test]
    fn parses_and_evaluates_curve() {
        let e = parse("1 + 0.1*cos(t)").unwrap();
        assert_eq!(e.eval(&env(&[("t", 0.0)])).unwrap(), 1.1);
    }

    #[test]
    fn parses_mp_hamiltonian_shape() {
        let e = parse("p^2/2 + (w^2*q^2 + c/q^2)/2").unwrap();
        let v = e.eval(&env(&[("p", 1.0), ("w", 1.0), ("q", 2.0), ("c", 4.0)])).unwrap();
        assert_eq!(v, 0.5 + (4.0 + 1.0) / 2.0);
    }

    #[test]
    fn dangling_operator_column() {
        assert_eq!(
            parse("2*"),
            Err(ExprError::Syntax {
                column: 3,
                message: "unexpected end of input".into()
            })
        );
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(parse("(1+2"), Err(ExprError::Syntax { column: 5, .. })));
        assert!(matches!(parse("1 $ 2"), Err(ExprError::Syntax { column: 3, .. })));
        assert!(matches!(parse("foo(1)"), Err(ExprError::Syntax { column: 1, .. })));
        assert!(matches!(parse("q^p"), Err(ExprError::Syntax { column: 3, .. })));
        assert!(matches!(parse("1 2"), Err(ExprError::Syntax { column: 3, .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = env(&[("x", 3.0)]);
        assert_eq!(parse("-x^2").unwrap().eval(&e).unwrap(), -9.0);
        assert_eq!(parse("2^3^2").unwrap().eval(&e).unwrap(), 512.0);
        assert_eq!(parse("8/4/2").unwrap().eval(&e).unwrap(), 1.0);
        assert_eq!(parse("8-4-2").unwrap().eval(&e).unwrap(), 2.0);
        assert_eq!(parse("x^-2").unwrap().eval(&e).unwrap(), 1.0 / 9.0);
        assert_eq!(parse("q^(-3)").unwrap(), Expr::Pow(Box::new(Expr::var("q")), -3.0));
        assert_eq!(parse("1.5e2 + .5").unwrap().eval(&e).unwrap(), 150.5);
    }

    #[test]
    fn evaluation_errors() {
        assert_eq!(parse("q*p/2").unwrap().eval(&env(&[("q", 1.0), ("p", 2.0)])).unwrap(), 1.0);
        assert!(matches!(
            parse("q/(q-q)").unwrap().eval(&env(&[("q", 1.0)])),
            Err(ExprError::Domain(_))
        ));
        assert_eq!(parse("sqrt(q)").unwrap().eval(&env(&[("q", 4.0)])).unwrap(), 2.0);
        assert!(matches!(
            parse("sqrt(q)").unwrap().eval(&env(&[("q", -4.0)])),
            Err(ExprError::Domain(_))
        ));
        assert_eq!(
            parse("x + 1").unwrap().eval(&Environment::new()),
            Err(ExprError::UnboundVariable("x".into()))
        );
    }

    #[test]
    fn derivatives() {
        let e = parse("q^2 - c/q^2").unwrap().differentiate("q");
        assert_eq!(e.eval(&env(&[("q", 1.0), ("c", 1.0)])).unwrap(), 4.0);
        assert_eq!(parse("5").unwrap().differentiate("t"), Expr::Num(0.0));
        let e = parse("sin(q)*p").unwrap().differentiate("q");
        assert_eq!(e.eval(&env(&[("q", 0.0), ("p", 3.0)])).unwrap(), 3.0);
        let e = parse("sqrt(x)").unwrap().differentiate("x");
        assert_eq!(e.eval(&env(&[("x", 4.0)])).unwrap(), 0.25);
        let e = parse("exp(2*x)").unwrap().differentiate("x");
        assert_eq!(e.eval(&env(&[("x", 0.0)])).unwrap(), 2.0);
    }

    #[test]
    fn identity_elimination() {
        assert_eq!(parse("x").unwrap().differentiate("x"), Expr::Num(1.0));
        assert_eq!(parse("3*x").unwrap().differentiate("x"), Expr::Num(3.0));
        assert_eq!(parse("x^2").unwrap().differentiate("x").to_string(), "(2 * x)");
    }

    #[test]
    fn serialize_examples() {
        assert_eq!(Expr::Num(2.5).serialize(), "2.5");
        let e = parse(&parse("1+2*t").unwrap().serialize()).unwrap();
        assert_eq!(e.eval(&env(&[("t", 7.0)])).unwrap(), 15.0);
        assert_eq!(Expr::Num(-0.5).serialize(), "(-0.5)");
        assert_eq!(parse("q^-3").unwrap().serialize(), "(q ^ (-3))");
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-5.0f64..5.0).prop_map(Expr::Num),
            prop_oneof![Just("x"), Just("y")].prop_map(Expr::var),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
                (inner.clone(), prop_oneof![Just(2.0), Just(3.0), Just(-1.0), Just(-2.0)])
                    .prop_map(|(a, k)| Expr::Pow(Box::new(a), k)),
                inner.clone().prop_map(|a| -a),
                inner.clone().prop_map(|a| Expr::Call(Func::Sin, Box::new(a))),
                inner.prop_map(|a| Expr::Call(Func::Exp, Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_identical(e in arb_expr(), x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let env = env(&[("x", x), ("y", y)]);
            let back = parse(&e.serialize()).unwrap();
            match (e.eval(&env), back.eval(&env)) {
                (Ok(a), Ok(b)) => prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
            }
        }

        #[test]
        fn derivative_matches_central_difference(e in arb_expr(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let h = 1e-5;
            let at = |x: f64| e.eval(&env(&[("x", x), ("y", y)]));
            let d = e.differentiate("x").eval(&env(&[("x", x), ("y", y)]));
            if let (Ok(p), Ok(m), Ok(v), Ok(d)) = (at(x + h), at(x - h), at(x), d) {
                let fd = (p - m) / (2.0 * h);
                // only smooth, moderately scaled neighborhoods are comparable
                let second = ((p - 2.0 * v + m) / (h * h)).abs();
                prop_assume!(v.abs() < 1e3 && d.abs() < 1e3 && second < 1e3 && fd.is_finite());
                prop_assert!((d - fd).abs() <= 1e-4 * (1.0 + d.abs()), "{d} vs {fd} for {e}");
            }
        }

        #[test]
        fn derivative_is_linear(a in -3.0f64..3.0, x in 0.2f64..2.0, y in -2.0f64..2.0) {
            let e1 = parse("x^3*y - sin(x)").unwrap();
            let e2 = parse("exp(x)/x + y^2").unwrap();
            let combo = Expr::Num(a) * e1.clone() + e2.clone();
            let env = env(&[("x", x), ("y", y)]);
            let lhs = combo.differentiate("x").eval(&env).unwrap();
            let rhs = a * e1.differentiate("x").eval(&env).unwrap() + e2.differentiate("x").eval(&env).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
