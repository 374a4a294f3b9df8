//! Linear perturbations `pi` and the composite `(g + pi) o f`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, ExprMap};

/// A linear map `R^m -> R^l` stored as an `l x m` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPerturbation {
    pub matrix: DMatrix<f64>,
}

impl LinearPerturbation {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn zero(outputs: usize, inputs: usize) -> Self {
        Self::new(DMatrix::zeros(outputs, inputs))
    }

    /// Builds from row-major entries.
    pub fn from_rows(outputs: usize, inputs: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != outputs * inputs {
            return Err(Error::InvalidInput(format!(
                "expected {} matrix entries, got {}",
                outputs * inputs,
                entries.len()
            )));
        }
        Ok(Self::new(DMatrix::from_row_slice(outputs, inputs, entries)))
    }

    /// Row-major entries, the coordinates used on the space of linear maps.
    pub fn entries(&self) -> Vec<f64> {
        let (r, c) = self.matrix.shape();
        (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).map(|(i, j)| self.matrix[(i, j)]).collect()
    }

    /// Uniform sample from the Frobenius ball of the given radius.
    pub fn sample_ball<R: Rng + ?Sized>(outputs: usize, inputs: usize, radius: f64, rng: &mut R) -> Self {
        let dim = outputs * inputs;
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let norm2: f64 = v.iter().map(|x| x * x).sum();
            if norm2 <= 1.0 {
                return Self::new(DMatrix::from_row_slice(outputs, inputs, &v) * radius);
            }
        }
    }

    pub fn outputs(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.matrix.ncols()
    }
}

/// `(g + pi) o f` for `f: R^n -> R^m`, `g: R^m -> R^l`, `pi: R^m -> R^l`.
pub fn perturbed_composite(g: &ExprMap, pi: &LinearPerturbation, f: &ExprMap) -> Result<ExprMap> {
    if g.arity_a() != 0 || f.arity_a() != 0 {
        return Err(Error::InvalidInput("perturbation operands must be parameter-free".into()));
    }
    let gp = g.add_linear(&pi.matrix)?;
    Ok(gp.compose(f)?)
}

/// The family `(x, pi) -> (g + pi)(f(x))` with the entries of `pi` (row-major)
/// as parameters.
pub fn perturbation_family(g: &ExprMap, f: &ExprMap) -> Result<ExprMap> {
    if g.arity_a() != 0 || f.arity_a() != 0 {
        return Err(Error::InvalidInput("perturbation operands must be parameter-free".into()));
    }
    let m = g.arity_x();
    let l = g.output_dim();
    let comps = g
        .components()
        .iter()
        .enumerate()
        .map(|(i, c)| (0..m).fold(c.clone(), |acc, j| acc.add(Expr::a(i * m + j).mul(Expr::x(j)))))
        .collect();
    let family = ExprMap::new(m, l * m, comps)?;
    Ok(family.compose(f)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Wrt;

    #[test]
    fn composite_jacobian_is_jg_plus_pi() {
        let g = ExprMap::parse("[x1^2, x1^2, x1^2]", 1, 0).unwrap();
        let f = ExprMap::identity(1);
        let pi = LinearPerturbation::from_rows(3, 1, &[0.5, 0.5, 0.5]).unwrap();
        let h = perturbed_composite(&g, &pi, &f).unwrap();
        let j = h.jacobian(&[-0.25], &[], Wrt::X).unwrap();
        assert!(j.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn family_matches_composite() {
        let g = ExprMap::parse("[x1*x2, x2^2]", 2, 0).unwrap();
        let f = ExprMap::parse("[x1, x1^3]", 1, 0).unwrap();
        let pi = LinearPerturbation::from_rows(2, 2, &[1.0, -2.0, 0.5, 3.0]).unwrap();
        let fam = perturbation_family(&g, &f).unwrap();
        let comp = perturbed_composite(&g, &pi, &f).unwrap();
        for x in [-1.0, 0.3, 2.0] {
            let a = fam.eval(&[x], &pi.entries()).unwrap();
            let b = comp.eval(&[x], &[]).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = crate::exec::substream(1, 0);
        for _ in 0..100 {
            let p = LinearPerturbation::sample_ball(2, 3, 0.5, &mut rng);
            assert!(p.matrix.norm() <= 0.5 + 1e-12);
        }
    }
}
