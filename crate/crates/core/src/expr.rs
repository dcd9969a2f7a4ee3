//! A small arithmetic expression language for coefficients and potentials.
//!
//! Grammar (precedence low to high): `+ -`, `* /`, unary `-`, `^` (right
//! associative), atoms. Atoms are numeric literals, the variables `x`, `y`
//! and `t`, the constants `pi` and `e`, parenthesised expressions and the
//! functions `sin cos exp ln sqrt abs sign`.
//!
//! Expressions can be differentiated symbolically in `t`, which is how the
//! slopes of piecewise potentials are obtained.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sign,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
            Func::Sign => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// Values bound to the expression variables.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vars {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl Vars {
    pub fn at(point: [f64; 2], t: f64) -> Self {
        Vars {
            x: point[0],
            y: point[1],
            t,
        }
    }
}

/// A parsed expression. Cheap to clone.
#[derive(Clone)]
pub struct Expr {
    source: Arc<str>,
    root: Arc<Node>,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", &*self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Expr::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            source,
        };
        let root = parser.expr()?;
        if parser.pos != tokens.len() {
            return Err(parse_error(source, "unexpected trailing input"));
        }
        Ok(Expr {
            source: source.trim().into(),
            root: Arc::new(root),
        })
    }

    pub fn constant(v: f64) -> Expr {
        Expr {
            source: format_number(v).into(),
            root: Arc::new(Node::Num(v)),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, vars: Vars) -> f64 {
        eval(&self.root, vars)
    }

    /// Evaluates a coefficient expression (no `t`) at a point.
    pub fn eval_at(&self, point: [f64; 2]) -> f64 {
        self.eval(Vars::at(point, 0.0))
    }

    pub fn depends_on(&self, var: Var) -> bool {
        depends(&self.root, var)
    }

    /// The value if the expression contains no variables.
    pub fn as_constant(&self) -> Option<f64> {
        if [Var::X, Var::Y, Var::T].iter().any(|&v| self.depends_on(v)) {
            None
        } else {
            Some(self.eval(Vars::default()))
        }
    }

    /// Symbolic derivative with respect to `t`.
    pub fn derivative_t(&self) -> Expr {
        let root = simplify(diff_t(&self.root));
        Expr {
            source: render(&root, 0).into(),
            root: Arc::new(root),
        }
    }
}

/// Formats a float so that it parses back to the same bits.
pub fn format_number(v: f64) -> String {
    let s = format!("{v:?}");
    if v < 0.0 {
        format!("({s})")
    } else {
        s
    }
}

fn parse_error(source: &str, message: &str) -> Error {
    Error::config("expression", format!("{message} in `{source}`"))
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(source: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
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
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| parse_error(source, &format!("bad number `{text}`")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else if c == '(' {
            out.push(Token::LParen);
            i += 1;
        } else if c == ')' {
            out.push(Token::RParen);
            i += 1;
        } else {
            return Err(parse_error(source, &format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    source: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Node::Add(lhs.into(), rhs.into())
            } else {
                Node::Sub(lhs.into(), rhs.into())
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Node::Mul(lhs.into(), rhs.into())
            } else {
                Node::Div(lhs.into(), rhs.into())
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(self.unary()?.into()))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Pow(base.into(), exponent.into()));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Node::Num(v)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "x" => Ok(Node::Var(Var::X)),
                "y" => Ok(Node::Var(Var::Y)),
                "t" => Ok(Node::Var(Var::T)),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                "e" => Ok(Node::Num(std::f64::consts::E)),
                other => {
                    let func = Func::from_name(other).ok_or_else(|| {
                        parse_error(self.source, &format!("unknown identifier `{other}`"))
                    })?;
                    if self.next() != Some(Token::LParen) {
                        return Err(parse_error(self.source, &format!("expected `(` after `{other}`")));
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Node::Call(func, arg.into()))
                }
            },
            Some(tok) => Err(parse_error(self.source, &format!("unexpected token {tok:?}"))),
            None => Err(parse_error(self.source, "unexpected end of input")),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if self.next() == Some(Token::RParen) {
            Ok(())
        } else {
            Err(parse_error(self.source, "expected `)`"))
        }
    }
}

fn eval(node: &Node, v: Vars) -> f64 {
    match node {
        Node::Num(c) => *c,
        Node::Var(Var::X) => v.x,
        Node::Var(Var::Y) => v.y,
        Node::Var(Var::T) => v.t,
        Node::Neg(a) => -eval(a, v),
        Node::Add(a, b) => eval(a, v) + eval(b, v),
        Node::Sub(a, b) => eval(a, v) - eval(b, v),
        Node::Mul(a, b) => eval(a, v) * eval(b, v),
        Node::Div(a, b) => eval(a, v) / eval(b, v),
        Node::Pow(a, b) => {
            let base = eval(a, v);
            let exp = eval(b, v);
            if exp == exp.trunc() && exp.abs() <= 16.0 {
                base.powi(exp as i32)
            } else {
                base.powf(exp)
            }
        }
        Node::Call(f, a) => f.apply(eval(a, v)),
    }
}

fn depends(node: &Node, var: Var) -> bool {
    match node {
        Node::Num(_) => false,
        Node::Var(w) => *w == var,
        Node::Neg(a) | Node::Call(_, a) => depends(a, var),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            depends(a, var) || depends(b, var)
        }
    }
}

fn num(v: f64) -> Box<Node> {
    Box::new(Node::Num(v))
}

fn diff_t(node: &Node) -> Node {
    use Node::*;
    if !depends(node, self::Var::T) {
        return Num(0.0);
    }
    match node {
        Num(_) | Var(_) => Num(1.0),
        Neg(a) => Neg(diff_t(a).into()),
        Add(a, b) => Add(diff_t(a).into(), diff_t(b).into()),
        Sub(a, b) => Sub(diff_t(a).into(), diff_t(b).into()),
        Mul(a, b) => Add(
            Mul(diff_t(a).into(), b.clone()).into(),
            Mul(a.clone(), diff_t(b).into()).into(),
        ),
        Div(a, b) => Div(
            Sub(
                Mul(diff_t(a).into(), b.clone()).into(),
                Mul(a.clone(), diff_t(b).into()).into(),
            )
            .into(),
            Pow(b.clone(), num(2.0)).into(),
        ),
        Pow(a, b) => {
            if !depends(b, crate::expr::Var::T) {
                // g * f^(g-1) * f'
                Mul(
                    Mul(b.clone(), Pow(a.clone(), Sub(b.clone(), num(1.0)).into()).into()).into(),
                    diff_t(a).into(),
                )
            } else {
                // f^g * (g' ln f + g f' / f)
                Mul(
                    node.clone().into(),
                    Add(
                        Mul(diff_t(b).into(), Call(Func::Ln, a.clone()).into()).into(),
                        Div(Mul(b.clone(), diff_t(a).into()).into(), a.clone()).into(),
                    )
                    .into(),
                )
            }
        }
        Call(f, a) => {
            let inner = diff_t(a);
            let outer = match f {
                Func::Sin => Call(Func::Cos, a.clone()),
                Func::Cos => Neg(Call(Func::Sin, a.clone()).into()),
                Func::Exp => Call(Func::Exp, a.clone()),
                Func::Ln => Div(num(1.0), a.clone()),
                Func::Sqrt => Div(num(0.5), Call(Func::Sqrt, a.clone()).into()),
                Func::Abs => Call(Func::Sign, a.clone()),
                Func::Sign => Num(0.0),
            };
            Mul(outer.into(), inner.into())
        }
    }
}

fn simplify(node: Node) -> Node {
    use Node::*;
    let is = |n: &Node, c: f64| matches!(n, Num(v) if *v == c);
    match node {
        Neg(a) => match simplify(*a) {
            Num(v) => Num(-v),
            Neg(inner) => *inner,
            other => Neg(other.into()),
        },
        Add(a, b) => {
            let (a, b) = (simplify(*a), simplify(*b));
            if is(&a, 0.0) {
                b
            } else if is(&b, 0.0) {
                a
            } else {
                Add(a.into(), b.into())
            }
        }
        Sub(a, b) => {
            let (a, b) = (simplify(*a), simplify(*b));
            if is(&b, 0.0) {
                a
            } else if is(&a, 0.0) {
                Neg(b.into())
            } else {
                Sub(a.into(), b.into())
            }
        }
        Mul(a, b) => {
            let (a, b) = (simplify(*a), simplify(*b));
            if is(&a, 0.0) || is(&b, 0.0) {
                Num(0.0)
            } else if is(&a, 1.0) {
                b
            } else if is(&b, 1.0) {
                a
            } else {
                Mul(a.into(), b.into())
            }
        }
        Div(a, b) => {
            let (a, b) = (simplify(*a), simplify(*b));
            if is(&a, 0.0) {
                Num(0.0)
            } else if is(&b, 1.0) {
                a
            } else {
                Div(a.into(), b.into())
            }
        }
        Pow(a, b) => {
            let (a, b) = (simplify(*a), simplify(*b));
            if is(&b, 1.0) {
                a
            } else if is(&b, 0.0) {
                Num(1.0)
            } else {
                Pow(a.into(), b.into())
            }
        }
        Call(f, a) => Call(f, simplify(*a).into()),
        other => other,
    }
}

fn render(node: &Node, parent_prec: u8) -> String {
    use Node::*;
    let (prec, s) = match node {
        Num(v) => (4, format_number(*v)),
        Var(self::Var::X) => (4, "x".into()),
        Var(self::Var::Y) => (4, "y".into()),
        Var(self::Var::T) => (4, "t".into()),
        Call(f, a) => (4, format!("{}({})", f.name(), render(a, 0))),
        Neg(a) => (2, format!("-{}", render(a, 3))),
        Add(a, b) => (0, format!("{} + {}", render(a, 0), render(b, 1))),
        Sub(a, b) => (0, format!("{} - {}", render(a, 0), render(b, 1))),
        Mul(a, b) => (1, format!("{}*{}", render(a, 1), render(b, 2))),
        Div(a, b) => (1, format!("{}/{}", render(a, 1), render(b, 2))),
        Pow(a, b) => (3, format!("{}^{}", render(a, 4), render(b, 3))),
    };
    if prec < parent_prec {
        format!("({s})")
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64, t: f64) -> f64 {
        Expr::parse(s).unwrap().eval(Vars { x, y: 0.0, t })
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0, 0.0), 512.0);
        assert_eq!(ev("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(ev("2 + x", 0.5, 0.0), 2.5);
        assert_eq!(ev("1.5e-1 * 2", 0.0, 0.0), 0.3);
        assert!((ev("2 + 0.5*sin(pi*x)", 0.5, 0.0) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("2 +").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("1 $ 2").is_err());
        assert!(Expr::parse("z").is_err());
    }

    #[test]
    fn derivative_of_power_in_t() {
        let d = Expr::parse("-abs(t)^(2 + x)").unwrap().derivative_t();
        for &(x, t) in &[(0.0, 0.5), (0.3, -0.7), (1.0, 2.0)] {
            let expected = -(2.0 + x) * f64::abs(t).powf(1.0 + x) * t.signum();
            let got = d.eval(Vars { x, y: 0.0, t });
            assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        }
        // derivative at the origin of |t|^h with h > 1 is zero, not NaN
        assert_eq!(d.eval(Vars { x: 0.2, y: 0.0, t: 0.0 }), 0.0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let e = Expr::parse("sin(t) * exp(x*t) + t^t / (1 + t^2) + sqrt(t) + ln(t)").unwrap();
        let d = e.derivative_t();
        let (x, t) = (0.4, 1.3);
        let h = 1e-6;
        let fd = (e.eval(Vars { x, y: 0.0, t: t + h }) - e.eval(Vars { x, y: 0.0, t: t - h })) / (2.0 * h);
        assert!((d.eval(Vars { x, y: 0.0, t }) - fd).abs() < 1e-7);
        // rendered derivative parses back to the same function
        let re = Expr::parse(d.source()).unwrap();
        assert!((re.eval(Vars { x, y: 0.0, t }) - fd).abs() < 1e-7);
    }

    #[test]
    fn constants_and_dependencies() {
        let e = Expr::parse("3 * pi").unwrap();
        assert!((e.as_constant().unwrap() - 3.0 * std::f64::consts::PI).abs() < 1e-15);
        assert!(Expr::parse("x*y").unwrap().as_constant().is_none());
        assert!(!Expr::parse("x*y").unwrap().depends_on(Var::T));
        let c = Expr::constant(-0.1);
        assert_eq!(Expr::parse(c.source()).unwrap().as_constant(), Some(-0.1));
    }
}
