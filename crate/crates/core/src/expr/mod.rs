//! One-variable radial expressions.
//!
//! Expressions are functions of the radial distance `r` written in a small
//! fixed grammar:
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;
//! primary = number | "r" | "pi" | "e" | func "(" expr ")" | "(" expr ")" ;
//! func    = "exp" | "log" | "sin" | "cos" | "sinh" | "cosh"
//!         | "tanh" | "coth" | "sqrt" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```
//!
//! `^` binds tighter than unary minus, which binds tighter than `*` and `/`.
//! `^` is right-associative, every other binary operator is left-associative.
//! A minus sign applied directly to a numeric literal is folded into the
//! literal, so `-3` is the constant node `-3` rather than a negation node.
//!
//! Printing emits the minimal parentheses needed for the printed text to parse
//! back into the same tree.

mod diff;
mod parse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use parse::parse;

/// Elementary functions available in expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Tanh,
    Coth,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Exp,
        Func::Log,
        Func::Sin,
        Func::Cos,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Coth,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Coth => "coth",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Log => {
                if x > 0.0 {
                    x.ln()
                } else {
                    f64::NAN
                }
            }
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Coth => {
                if x == 0.0 {
                    f64::NAN
                } else {
                    1.0 / x.tanh()
                }
            }
            Func::Sqrt => {
                if x >= 0.0 {
                    x.sqrt()
                } else {
                    f64::NAN
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

const PREC_NEG: u8 = 3;
const PREC_ATOM: u8 = 5;

/// Expression tree over the single variable `r`.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialExpr {
    Const(f64),
    Var,
    Neg(Box<RadialExpr>),
    Call(Func, Box<RadialExpr>),
    Binary(BinOp, Box<RadialExpr>, Box<RadialExpr>),
}

impl RadialExpr {
    pub fn constant(c: f64) -> Self {
        RadialExpr::Const(c)
    }

    pub fn var() -> Self {
        RadialExpr::Var
    }

    /// The constant value if this node is a literal.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            RadialExpr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// True when the expression contains the variable `r`.
    pub fn depends_on_r(&self) -> bool {
        match self {
            RadialExpr::Const(_) => false,
            RadialExpr::Var => true,
            RadialExpr::Neg(a) | RadialExpr::Call(_, a) => a.depends_on_r(),
            RadialExpr::Binary(_, a, b) => a.depends_on_r() || b.depends_on_r(),
        }
    }

    /// Value of the expression when it does not depend on `r`.
    pub fn constant_value(&self) -> Option<f64> {
        if self.depends_on_r() {
            None
        } else {
            self.evaluate(1.0).ok()
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            RadialExpr::Const(_) | RadialExpr::Var => 1,
            RadialExpr::Neg(a) | RadialExpr::Call(_, a) => 1 + a.size(),
            RadialExpr::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Evaluates the expression at `r` in double precision.
    ///
    /// Any sub-expression that produces a non-finite value (log of a
    /// non-positive number, division by zero, overflow, ...) yields
    /// [`Error::Domain`] naming the offending node.
    pub fn evaluate(&self, r: f64) -> Result<f64> {
        let value = match self {
            RadialExpr::Const(c) => *c,
            RadialExpr::Var => r,
            RadialExpr::Neg(a) => -a.evaluate(r)?,
            RadialExpr::Call(f, a) => f.apply(a.evaluate(r)?),
            RadialExpr::Binary(op, a, b) => {
                let x = a.evaluate(r)?;
                let y = b.evaluate(r)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            f64::NAN
                        } else {
                            x / y
                        }
                    }
                    BinOp::Pow => pow(x, y),
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::domain(r, self.to_string()))
        }
    }

    /// Symbolic derivative with respect to `r`.
    pub fn differentiate(&self) -> RadialExpr {
        diff::derivative(self)
    }

    fn precedence(&self) -> u8 {
        match self {
            RadialExpr::Const(c) if c.is_sign_negative() => PREC_ATOM,
            RadialExpr::Const(_) | RadialExpr::Var | RadialExpr::Call(..) => PREC_ATOM,
            RadialExpr::Neg(_) => PREC_NEG,
            RadialExpr::Binary(op, ..) => op.precedence(),
        }
    }

    fn fmt_wrapped(&self, f: &mut fmt::Formatter<'_>, wrap: bool) -> fmt::Result {
        if wrap {
            write!(f, "(")?;
            self.fmt_node(f)?;
            write!(f, ")")
        } else {
            self.fmt_node(f)
        }
    }

    fn fmt_node(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialExpr::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "(-{})", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            RadialExpr::Var => write!(f, "r"),
            RadialExpr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_wrapped(f, a.precedence() < PREC_NEG)
            }
            RadialExpr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_node(f)?;
                write!(f, ")")
            }
            RadialExpr::Binary(op, a, b) => {
                let prec = op.precedence();
                let (wrap_left, wrap_right) = match op {
                    BinOp::Pow => (a.precedence() <= prec, b.precedence() < PREC_NEG),
                    _ => (a.precedence() < prec, b.precedence() <= prec),
                };
                a.fmt_wrapped(f, wrap_left)?;
                write!(f, "{}", op.symbol())?;
                b.fmt_wrapped(f, wrap_right)
            }
        }
    }
}

fn pow(x: f64, y: f64) -> f64 {
    if y == 2.0 {
        x * x
    } else if y.fract() == 0.0 && y.abs() <= 64.0 {
        x.powi(y as i32)
    } else {
        x.powf(y)
    }
}

impl fmt::Display for RadialExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_node(f)
    }
}

impl FromStr for RadialExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}

impl Serialize for RadialExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RadialExpr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

// Smart constructors applying the local simplifications used by the
// differentiator: 0*x -> 0, 1*x -> x, x+0 -> x, x^1 -> x, constant folding.

pub(crate) fn neg(a: RadialExpr) -> RadialExpr {
    match a {
        RadialExpr::Const(c) => RadialExpr::Const(-c),
        RadialExpr::Neg(inner) => *inner,
        other => RadialExpr::Neg(Box::new(other)),
    }
}

fn fold(op: BinOp, x: f64, y: f64) -> Option<RadialExpr> {
    let v = match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        BinOp::Div if y != 0.0 => x / y,
        BinOp::Pow => pow(x, y),
        BinOp::Div => return None,
    };
    v.is_finite().then_some(RadialExpr::Const(v))
}

pub(crate) fn binary(op: BinOp, a: RadialExpr, b: RadialExpr) -> RadialExpr {
    use RadialExpr::Const;
    if let (Const(x), Const(y)) = (&a, &b) {
        if let Some(folded) = fold(op, *x, *y) {
            return folded;
        }
    }
    match (op, a.as_constant(), b.as_constant()) {
        (BinOp::Add, Some(x), _) if x == 0.0 => b,
        (BinOp::Add, _, Some(y)) if y == 0.0 => a,
        (BinOp::Sub, _, Some(y)) if y == 0.0 => a,
        (BinOp::Sub, Some(x), _) if x == 0.0 => neg(b),
        (BinOp::Mul, Some(x), _) | (BinOp::Mul, _, Some(x)) if x == 0.0 => Const(0.0),
        (BinOp::Mul, Some(x), _) if x == 1.0 => b,
        (BinOp::Mul, _, Some(y)) if y == 1.0 => a,
        (BinOp::Mul, Some(x), _) if x == -1.0 => neg(b),
        (BinOp::Mul, _, Some(y)) if y == -1.0 => neg(a),
        (BinOp::Div, Some(x), _) if x == 0.0 => Const(0.0),
        (BinOp::Div, _, Some(y)) if y == 1.0 => a,
        (BinOp::Pow, _, Some(y)) if y == 1.0 => a,
        (BinOp::Pow, _, Some(y)) if y == 0.0 => Const(1.0),
        _ => RadialExpr::Binary(op, Box::new(a), Box::new(b)),
    }
}

pub(crate) fn call(func: Func, a: RadialExpr) -> RadialExpr {
    RadialExpr::Call(func, Box::new(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(s: &str) -> RadialExpr {
        parse(s).unwrap()
    }

    #[test]
    fn evaluates_simple_expressions() {
        assert_eq!(p("r^2").evaluate(3.0).unwrap(), 9.0);
        assert_eq!(p("sinh(r)").evaluate(0.0).unwrap(), 0.0);
        assert_relative_eq!(
            p("exp(-r)*r").evaluate(1.0).unwrap(),
            0.36787944117144233,
            max_relative = 1e-15
        );
        assert_relative_eq!(p("coth(1)").evaluate(0.0).unwrap(), 1.3130352854993312, max_relative = 1e-15);
    }

    #[test]
    fn domain_errors_name_the_node() {
        match p("2 + log(r - 1)").evaluate(1.0) {
            Err(Error::Domain { r, node }) => {
                assert_eq!(r, 1.0);
                assert_eq!(node, "log(r - 1)");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(p("1/r").evaluate(0.0).is_err());
        assert!(p("sqrt(r - 2)").evaluate(1.0).is_err());
        assert!(p("coth(r)").evaluate(0.0).is_err());
        assert!(p("(-r)^0.5").evaluate(2.0).is_err());
        assert!(p("exp(r)").evaluate(1000.0).is_err());
    }

    #[test]
    fn negative_base_integer_power() {
        assert_eq!(p("(-r)^3").evaluate(2.0).unwrap(), -8.0);
    }

    #[test]
    fn prints_minimal_parentheses() {
        for (src, printed) in [
            ("sinh(2*r)/2", "sinh(2*r)/2"),
            ("(r+1)*(r-1)", "(r + 1)*(r - 1)"),
            ("r-(r-1)", "r - (r - 1)"),
            ("(r-r)-1", "r - r - 1"),
            ("2^3^r", "2^3^r"),
            ("(2^3)^r", "(2^3)^r"),
            ("-r^2", "-r^2"),
            ("(-r)^2", "(-r)^2"),
            ("-(r*2)", "-(r*2)"),
            ("2^-r", "2^-r"),
            ("r/(2*r)", "r/(2*r)"),
            ("-3 + r", "(-3) + r"),
            ("r*(-2)", "r*(-2)"),
        ] {
            assert_eq!(p(src).to_string(), printed, "source {src}");
        }
    }

    #[test]
    fn pi_and_e_are_constants() {
        assert_eq!(p("pi"), RadialExpr::Const(std::f64::consts::PI));
        assert_eq!(p("e"), RadialExpr::Const(std::f64::consts::E));
        assert_eq!(p(&p("pi*r").to_string()), p("pi*r"));
    }

    #[test]
    fn serde_uses_text_form() {
        let e = p("1 + tanh(r)");
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, "\"1 + tanh(r)\"");
        let back: RadialExpr = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn constant_detection() {
        assert_eq!(p("0.5*2").constant_value(), Some(1.0));
        assert_eq!(p("r").constant_value(), None);
        assert!(!p("exp(pi)").depends_on_r());
    }
}
