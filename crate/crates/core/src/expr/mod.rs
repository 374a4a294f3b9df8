//! Parsed multivariate maps `R^n x R^p -> R^q` with exact forward-mode
//! first and second derivatives.

mod ast;
mod dual;
mod parse;

pub use ast::{Expr, UnaryFn, Var};
pub use dual::{Dual, Dual2, Scalar};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::ExprError;

/// Which inputs a derivative is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Wrt {
    /// State variables `x` only.
    X,
    /// Parameters `a` only.
    A,
    /// All inputs, state first.
    XA,
}

/// An immutable vector-valued expression map over `x1..xn` and `a1..ap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExprMap {
    arity_x: usize,
    arity_a: usize,
    components: Vec<Expr>,
}

impl ExprMap {
    /// Parses `"[e1, e2, ...]"`, `"e1; e2"` or a single expression.
    pub fn parse(source: &str, arity_x: usize, arity_a: usize) -> Result<Self, ExprError> {
        let components = parse::parse_components(source, arity_x, arity_a)?;
        Ok(Self {
            arity_x,
            arity_a,
            components,
        })
    }

    pub fn new(arity_x: usize, arity_a: usize, components: Vec<Expr>) -> Result<Self, ExprError> {
        for c in &components {
            let (n, p) = c.required_arity();
            if n > arity_x {
                return Err(ExprError::Arity {
                    what: "state variable index",
                    expected: arity_x,
                    found: n,
                });
            }
            if p > arity_a {
                return Err(ExprError::Arity {
                    what: "parameter index",
                    expected: arity_a,
                    found: p,
                });
            }
        }
        Ok(Self {
            arity_x,
            arity_a,
            components,
        })
    }

    /// The identity map on `R^n`.
    pub fn identity(n: usize) -> Self {
        Self {
            arity_x: n,
            arity_a: 0,
            components: (0..n).map(Expr::x).collect(),
        }
    }

    pub fn arity_x(&self) -> usize {
        self.arity_x
    }

    pub fn arity_a(&self) -> usize {
        self.arity_a
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// Source text that parses back to an equivalent map.
    pub fn to_source(&self) -> String {
        let parts: Vec<String> = self.components.iter().map(|c| c.to_string()).collect();
        format!("[{}]", parts.join(", "))
    }

    fn check_inputs(&self, x: &[f64], a: &[f64]) -> Result<(), ExprError> {
        if x.len() != self.arity_x {
            return Err(ExprError::Arity {
                what: "state vector",
                expected: self.arity_x,
                found: x.len(),
            });
        }
        if a.len() != self.arity_a {
            return Err(ExprError::Arity {
                what: "parameter vector",
                expected: self.arity_a,
                found: a.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], a: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.check_inputs(x, a)?;
        let vars: Vec<f64> = x.iter().chain(a).copied().collect();
        self.components
            .iter()
            .map(|c| eval_expr(c, &vars, self.arity_x, 0))
            .collect()
    }

    /// Evaluates every component on arbitrary scalars; `vars` is `x` followed by `a`.
    pub fn eval_scalar<S: Scalar>(&self, vars: &[S], dim: usize) -> Result<Vec<S>, ExprError> {
        if vars.len() != self.arity_x + self.arity_a {
            return Err(ExprError::Arity {
                what: "input vector",
                expected: self.arity_x + self.arity_a,
                found: vars.len(),
            });
        }
        self.components
            .iter()
            .map(|c| eval_expr(c, vars, self.arity_x, dim))
            .collect()
    }

    fn seeded<S: Scalar>(
        &self,
        x: &[f64],
        a: &[f64],
        wrt: Wrt,
        var: impl Fn(f64, usize, usize) -> S,
    ) -> (Vec<S>, usize) {
        let (n, p) = (self.arity_x, self.arity_a);
        let dim = match wrt {
            Wrt::X => n,
            Wrt::A => p,
            Wrt::XA => n + p,
        };
        let mut vars = Vec::with_capacity(n + p);
        for (i, &v) in x.iter().enumerate() {
            vars.push(match wrt {
                Wrt::X | Wrt::XA => var(v, i, dim),
                Wrt::A => S::lift(v, dim),
            });
        }
        for (j, &v) in a.iter().enumerate() {
            vars.push(match wrt {
                Wrt::A => var(v, j, dim),
                Wrt::XA => var(v, n + j, dim),
                Wrt::X => S::lift(v, dim),
            });
        }
        (vars, dim)
    }

    /// Value and Jacobian (`output_dim x selected inputs`) in one pass.
    pub fn eval_with_jacobian(
        &self,
        x: &[f64],
        a: &[f64],
        wrt: Wrt,
    ) -> Result<(Vec<f64>, DMatrix<f64>), ExprError> {
        self.check_inputs(x, a)?;
        let (vars, dim) = self.seeded(x, a, wrt, Dual::variable);
        let out = self.eval_scalar(&vars, dim)?;
        let values = out.iter().map(|d| d.value).collect();
        let jac = DMatrix::from_fn(out.len(), dim, |i, j| out[i].first[j]);
        Ok((values, jac))
    }

    pub fn jacobian(&self, x: &[f64], a: &[f64], wrt: Wrt) -> Result<DMatrix<f64>, ExprError> {
        self.eval_with_jacobian(x, a, wrt).map(|(_, j)| j)
    }

    /// Hessians with respect to the state variables, one per component.
    pub fn hessians(&self, x: &[f64], a: &[f64]) -> Result<Vec<DMatrix<f64>>, ExprError> {
        self.hessians_wrt(x, a, Wrt::X)
    }

    pub fn hessians_wrt(
        &self,
        x: &[f64],
        a: &[f64],
        wrt: Wrt,
    ) -> Result<Vec<DMatrix<f64>>, ExprError> {
        self.check_inputs(x, a)?;
        let (vars, dim) = self.seeded(x, a, wrt, Dual2::variable);
        let out = self.eval_scalar(&vars, dim)?;
        Ok(out
            .iter()
            .map(|d| DMatrix::from_row_slice(dim, dim, &d.second))
            .collect())
    }

    /// `self(inner(x, a))` where `self` is a map of `inner.output_dim()` state
    /// variables (its own parameters, if any, stay as parameters of the result
    /// only when `inner` has none).
    pub fn compose(&self, inner: &ExprMap) -> Result<ExprMap, ExprError> {
        if self.arity_x != inner.output_dim() {
            return Err(ExprError::Arity {
                what: "composition inner output",
                expected: self.arity_x,
                found: inner.output_dim(),
            });
        }
        if self.arity_a != 0 && inner.arity_a != 0 {
            return Err(ExprError::Arity {
                what: "composition parameters",
                expected: 0,
                found: self.arity_a,
            });
        }
        let components = self
            .components
            .iter()
            .map(|c| {
                c.substitute(&|v| match v {
                    Var::State(i) => inner.components[i].clone(),
                    Var::Param(j) => Expr::a(j),
                })
            })
            .collect();
        ExprMap::new(inner.arity_x, inner.arity_a.max(self.arity_a), components)
    }

    /// The section `F_a = F(., a)` as a map without parameters.
    pub fn section(&self, a: &[f64]) -> Result<ExprMap, ExprError> {
        self.check_inputs(&vec![0.0; self.arity_x], a)?;
        let components = self
            .components
            .iter()
            .map(|c| {
                c.substitute(&|v| match v {
                    Var::State(i) => Expr::x(i),
                    Var::Param(j) => Expr::Const(a[j]),
                })
            })
            .collect();
        Ok(ExprMap {
            arity_x: self.arity_x,
            arity_a: 0,
            components,
        })
    }

    /// Treats parameters as additional trailing state variables.
    pub fn flatten_params(&self) -> ExprMap {
        let n = self.arity_x;
        let components = self
            .components
            .iter()
            .map(|c| {
                c.substitute(&|v| match v {
                    Var::State(i) => Expr::x(i),
                    Var::Param(j) => Expr::x(n + j),
                })
            })
            .collect();
        ExprMap {
            arity_x: n + self.arity_a,
            arity_a: 0,
            components,
        }
    }

    /// `self + L x` for a `output_dim x arity_x` matrix `L`.
    pub fn add_linear(&self, matrix: &DMatrix<f64>) -> Result<ExprMap, ExprError> {
        if matrix.nrows() != self.output_dim() || matrix.ncols() != self.arity_x {
            return Err(ExprError::Arity {
                what: "linear perturbation shape",
                expected: self.output_dim() * self.arity_x,
                found: matrix.nrows() * matrix.ncols(),
            });
        }
        let components = self
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                (0..self.arity_x).fold(c.clone(), |acc, j| {
                    acc.add(Expr::Const(matrix[(i, j)]).mul(Expr::x(j)))
                })
            })
            .collect();
        Ok(ExprMap {
            arity_x: self.arity_x,
            arity_a: self.arity_a,
            components,
        })
    }

    /// Sub-map made of the selected components (in the given order).
    pub fn select(&self, indices: &[usize]) -> ExprMap {
        ExprMap {
            arity_x: self.arity_x,
            arity_a: self.arity_a,
            components: indices.iter().map(|&i| self.components[i].clone()).collect(),
        }
    }

    /// `sum_i w_i * component_i` as a scalar map.
    pub fn weighted_sum(&self, weights: &[f64]) -> ExprMap {
        let sum = self
            .components
            .iter()
            .zip(weights)
            .fold(Expr::Const(0.0), |acc, (c, w)| {
                acc.add(Expr::Const(*w).mul(c.clone()))
            });
        ExprMap {
            arity_x: self.arity_x,
            arity_a: self.arity_a,
            components: vec![sum],
        }
    }
}

fn eval_expr<S: Scalar>(e: &Expr, vars: &[S], n: usize, dim: usize) -> Result<S, ExprError> {
    Ok(match e {
        Expr::Const(c) => S::lift(*c, dim),
        Expr::Var(Var::State(i)) => vars[*i].clone(),
        Expr::Var(Var::Param(j)) => vars[n + *j].clone(),
        Expr::Neg(inner) => eval_expr(inner, vars, n, dim)?.neg(),
        Expr::Add(l, r) => eval_expr(l, vars, n, dim)?.add(&eval_expr(r, vars, n, dim)?),
        Expr::Sub(l, r) => eval_expr(l, vars, n, dim)?.sub(&eval_expr(r, vars, n, dim)?),
        Expr::Mul(l, r) => eval_expr(l, vars, n, dim)?.mul(&eval_expr(r, vars, n, dim)?),
        Expr::Div(l, r) => {
            let num = eval_expr(l, vars, n, dim)?;
            let den = eval_expr(r, vars, n, dim)?;
            let v = den.value();
            if v == 0.0 {
                return Err(ExprError::Domain {
                    function: "division",
                    value: v,
                });
            }
            num.mul(&den.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v)))
        }
        Expr::Pow(base, k) => {
            let b = eval_expr(base, vars, n, dim)?;
            let v = b.value();
            let k = *k;
            if k < 0 && v == 0.0 {
                return Err(ExprError::Domain {
                    function: "negative power",
                    value: v,
                });
            }
            let kf = k as f64;
            let d1 = if k == 0 { 0.0 } else { kf * v.powi(k - 1) };
            let d2 = if k == 0 || k == 1 {
                0.0
            } else {
                kf * (kf - 1.0) * v.powi(k - 2)
            };
            b.chain(v.powi(k), d1, d2)
        }
        Expr::Call(func, arg) => {
            let u = eval_expr(arg, vars, n, dim)?;
            let v = u.value();
            let domain = |function| ExprError::Domain { function, value: v };
            match func {
                UnaryFn::Sin => u.chain(v.sin(), v.cos(), -v.sin()),
                UnaryFn::Cos => u.chain(v.cos(), -v.sin(), -v.cos()),
                UnaryFn::Exp => {
                    let ev = v.exp();
                    u.chain(ev, ev, ev)
                }
                UnaryFn::Log => {
                    if v <= 0.0 {
                        return Err(domain("log"));
                    }
                    u.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
                }
                UnaryFn::Sqrt => {
                    if v < 0.0 || (S::DIFFERENTIABLE && v == 0.0) {
                        return Err(domain("sqrt"));
                    }
                    let s = v.sqrt();
                    u.chain(s, 0.5 / s, -0.25 / (s * v))
                }
                // abs is given the zero derivative at its kink
                UnaryFn::Abs => {
                    let sign = if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    u.chain(v.abs(), sign, 0.0)
                }
            }
        }
    })
}
