//! Forward-mode dual numbers carrying a full gradient (first order) or a
//! gradient and Hessian (second order, truncated Taylor arithmetic).

/// Number type the expression evaluator is generic over.
pub trait Scalar: Clone {
    /// Whether derivative information is carried (singular points of
    /// non-smooth functions are rejected when it is).
    const DIFFERENTIABLE: bool;

    fn lift(c: f64, dim: usize) -> Self;
    fn value(&self) -> f64;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Applies a scalar function given its value and first two derivatives
    /// at `self.value()`.
    fn chain(&self, f: f64, df: f64, d2f: f64) -> Self;
}

impl Scalar for f64 {
    const DIFFERENTIABLE: bool = false;

    fn lift(c: f64, _dim: usize) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn chain(&self, f: f64, _df: f64, _d2f: f64) -> Self {
        f
    }
}

/// First-order dual number: value and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub first: Vec<f64>,
}

impl Dual {
    pub fn constant(value: f64, dim: usize) -> Self {
        Self {
            value,
            first: vec![0.0; dim],
        }
    }

    /// The coordinate function `index` of `dim`, evaluated at `value`.
    pub fn variable(value: f64, index: usize, dim: usize) -> Self {
        let mut d = Self::constant(value, dim);
        d.first[index] = 1.0;
        d
    }
}

impl Scalar for Dual {
    const DIFFERENTIABLE: bool = true;

    fn lift(c: f64, dim: usize) -> Self {
        Dual::constant(c, dim)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn add(&self, rhs: &Self) -> Self {
        Dual {
            value: self.value + rhs.value,
            first: zip_with(&self.first, &rhs.first, |a, b| a + b),
        }
    }
    fn sub(&self, rhs: &Self) -> Self {
        Dual {
            value: self.value - rhs.value,
            first: zip_with(&self.first, &rhs.first, |a, b| a - b),
        }
    }
    fn mul(&self, rhs: &Self) -> Self {
        let (u, v) = (self.value, rhs.value);
        Dual {
            value: u * v,
            first: zip_with(&self.first, &rhs.first, |du, dv| du * v + u * dv),
        }
    }
    fn neg(&self) -> Self {
        Dual {
            value: -self.value,
            first: self.first.iter().map(|d| -d).collect(),
        }
    }
    fn chain(&self, f: f64, df: f64, _d2f: f64) -> Self {
        Dual {
            value: f,
            first: self.first.iter().map(|d| df * d).collect(),
        }
    }
}

/// Second-order dual number: value, gradient and symmetric Hessian
/// (row-major, `dim * dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dual2 {
    pub value: f64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl Dual2 {
    pub fn constant(value: f64, dim: usize) -> Self {
        Self {
            value,
            first: vec![0.0; dim],
            second: vec![0.0; dim * dim],
        }
    }

    pub fn variable(value: f64, index: usize, dim: usize) -> Self {
        let mut d = Self::constant(value, dim);
        d.first[index] = 1.0;
        d
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }
}

impl Scalar for Dual2 {
    const DIFFERENTIABLE: bool = true;

    fn lift(c: f64, dim: usize) -> Self {
        Dual2::constant(c, dim)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn add(&self, rhs: &Self) -> Self {
        Dual2 {
            value: self.value + rhs.value,
            first: zip_with(&self.first, &rhs.first, |a, b| a + b),
            second: zip_with(&self.second, &rhs.second, |a, b| a + b),
        }
    }
    fn sub(&self, rhs: &Self) -> Self {
        Dual2 {
            value: self.value - rhs.value,
            first: zip_with(&self.first, &rhs.first, |a, b| a - b),
            second: zip_with(&self.second, &rhs.second, |a, b| a - b),
        }
    }
    fn mul(&self, rhs: &Self) -> Self {
        let n = self.dim();
        let (u, v) = (self.value, rhs.value);
        let first = zip_with(&self.first, &rhs.first, |du, dv| du * v + u * dv);
        let mut second = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                second[k] = self.second[k] * v
                    + u * rhs.second[k]
                    + self.first[i] * rhs.first[j]
                    + self.first[j] * rhs.first[i];
            }
        }
        Dual2 {
            value: u * v,
            first,
            second,
        }
    }
    fn neg(&self) -> Self {
        Dual2 {
            value: -self.value,
            first: self.first.iter().map(|d| -d).collect(),
            second: self.second.iter().map(|d| -d).collect(),
        }
    }
    fn chain(&self, f: f64, df: f64, d2f: f64) -> Self {
        let n = self.dim();
        let mut second = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                second[k] = df * self.second[k] + d2f * self.first[i] * self.first[j];
            }
        }
        Dual2 {
            value: f,
            first: self.first.iter().map(|d| df * d).collect(),
            second,
        }
    }
}

fn zip_with(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}
