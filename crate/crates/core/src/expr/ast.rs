use std::fmt;

use serde::{Deserialize, Serialize};

/// A variable reference; indices are zero-based (`x1` is `State(0)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Var {
    State(usize),
    Param(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryFn {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl UnaryFn {
    pub fn name(self) -> &'static str {
        match self {
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Exp => "exp",
            UnaryFn::Log => "log",
            UnaryFn::Sqrt => "sqrt",
            UnaryFn::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryFn::Sin,
            "cos" => UnaryFn::Cos,
            "exp" => UnaryFn::Exp,
            "log" => UnaryFn::Log,
            "sqrt" => UnaryFn::Sqrt,
            "abs" => UnaryFn::Abs,
            _ => return None,
        })
    }
}

/// Expression tree over state variables, parameters and constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(UnaryFn, Box<Expr>),
}

impl Expr {
    pub fn x(i: usize) -> Expr {
        Expr::Var(Var::State(i))
    }

    pub fn a(i: usize) -> Expr {
        Expr::Var(Var::Param(i))
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }

    /// Largest state and parameter index referenced, as `(n_needed, p_needed)`.
    pub fn required_arity(&self) -> (usize, usize) {
        let mut acc = (0, 0);
        self.visit_vars(&mut |v| match v {
            Var::State(i) => acc.0 = acc.0.max(i + 1),
            Var::Param(i) => acc.1 = acc.1.max(i + 1),
        });
        acc
    }

    fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => e.visit_vars(f),
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => {
                l.visit_vars(f);
                r.visit_vars(f);
            }
        }
    }

    /// Replaces every variable by the expression `subst` returns for it.
    pub fn substitute(&self, subst: &impl Fn(Var) -> Expr) -> Expr {
        let go = |e: &Expr| Box::new(e.substitute(subst));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) => subst(*v),
            Expr::Neg(e) => Expr::Neg(go(e)),
            Expr::Add(l, r) => Expr::Add(go(l), go(r)),
            Expr::Sub(l, r) => Expr::Sub(go(l), go(r)),
            Expr::Mul(l, r) => Expr::Mul(go(l), go(r)),
            Expr::Div(l, r) => Expr::Div(go(l), go(r)),
            Expr::Pow(e, k) => Expr::Pow(go(e), *k),
            Expr::Call(func, e) => Expr::Call(*func, go(e)),
        }
    }
}

// Printing is fully parenthesised so that the output re-parses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "(-{})", -c)
            }
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Var::State(i)) => write!(f, "x{}", i + 1),
            Expr::Var(Var::Param(i)) => write!(f, "a{}", i + 1),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Add(l, r) => write!(f, "({l} + {r})"),
            Expr::Sub(l, r) => write!(f, "({l} - {r})"),
            Expr::Mul(l, r) => write!(f, "({l} * {r})"),
            Expr::Div(l, r) => write!(f, "({l} / {r})"),
            Expr::Pow(e, k) => write!(f, "({e})^{k}"),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}
