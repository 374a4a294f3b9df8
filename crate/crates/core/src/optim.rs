//! Small derivative-free and Gauss-Newton solvers used by the searches.

use nalgebra::{DMatrix, DVector};

use crate::domain::BoxDomain;

/// Result of a local solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolution {
    pub x: Vec<f64>,
    /// Final objective (Nelder-Mead) or residual infinity norm (Gauss-Newton).
    pub value: f64,
    pub iterations: usize,
}

/// Nelder-Mead simplex search, optionally clamped to a box.
pub fn nelder_mead<F>(
    f: F,
    x0: &[f64],
    step: f64,
    max_iter: usize,
    f_tol: f64,
    bounds: Option<&BoxDomain>,
) -> LocalSolution
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let clamp = |mut p: Vec<f64>| {
        if let Some(b) = bounds {
            b.clamp(&mut p);
        }
        p
    };
    let eval = |p: &[f64]| {
        let v = f(p);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let p0 = clamp(x0.to_vec());
    simplex.push((p0.clone(), eval(&p0)));
    for i in 0..n {
        let mut p = p0.clone();
        p[i] += step;
        if let Some(b) = bounds {
            if p[i] > b.hi[i] {
                p[i] = p0[i] - step;
            }
        }
        let p = clamp(p);
        let v = eval(&p);
        simplex.push((p, v));
    }

    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= f_tol * (1.0 + best.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(p, _)| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| {
            clamp(
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect(),
            )
        };
        let reflected = along(1.0);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(2.0);
            let fe = eval(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = if fr < worst { along(0.5) } else { along(-0.5) };
            let fc = eval(&contracted);
            if fc < worst.min(fr) {
                simplex[n] = (contracted, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let p = clamp(
                        anchor
                            .iter()
                            .zip(&entry.0)
                            .map(|(a, q)| a + 0.5 * (q - a))
                            .collect(),
                    );
                    let v = eval(&p);
                    *entry = (p, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    LocalSolution {
        x,
        value,
        iterations,
    }
}

/// Minimum-norm Gauss-Newton iteration for `r(x) = 0`.
///
/// `system` returns the residual and its Jacobian, or `None` when `x` is
/// outside the domain of definition (the iteration then stops).
pub fn gauss_newton<S>(system: S, x0: &[f64], res_tol: f64, max_iter: usize) -> LocalSolution
where
    S: Fn(&[f64]) -> Option<(Vec<f64>, DMatrix<f64>)>,
{
    let mut x = x0.to_vec();
    let mut best = LocalSolution {
        x: x.clone(),
        value: f64::INFINITY,
        iterations: 0,
    };
    for it in 0..=max_iter {
        let Some((r, j)) = system(&x) else { break };
        let norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !norm.is_finite() {
            break;
        }
        if norm < best.value {
            best = LocalSolution {
                x: x.clone(),
                value: norm,
                iterations: it,
            };
        }
        if norm <= res_tol || it == max_iter || j.iter().any(|v| !v.is_finite()) {
            break;
        }
        let Some(step) = min_norm_solve(&j, &r) else { break };
        let step_norm = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (xi, si) in x.iter_mut().zip(step.iter()) {
            *xi -= si;
        }
        let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if step_norm <= 1e-14 * scale {
            if let Some((r, _)) = system(&x) {
                let norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if norm < best.value {
                    best = LocalSolution {
                        x: x.clone(),
                        value: norm,
                        iterations: it + 1,
                    };
                }
            }
            break;
        }
    }
    best
}

/// Least-squares solution of minimum norm for `J s = r`.
pub fn min_norm_solve(j: &DMatrix<f64>, r: &[f64]) -> Option<DVector<f64>> {
    if j.ncols() == 0 {
        return None;
    }
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, v| m.max(*v));
    if smax == 0.0 {
        return None;
    }
    let rhs = DVector::from_column_slice(r);
    svd.solve(&rhs, 1e-12 * smax).ok()
}

/// Central finite-difference Jacobian of `f` at `x`.
pub fn fd_jacobian<F>(f: F, x: &[f64], h: f64) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut p = x.to_vec();
    let mut cols = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let plus = f(&p)?;
        p[i] = x[i] - h;
        let minus = f(&p)?;
        p[i] = x[i];
        cols.push(
            plus.iter()
                .zip(&minus)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect::<Vec<f64>>(),
        );
    }
    let rows = cols.first().map_or(0, Vec::len);
    Some(DMatrix::from_fn(rows, x.len(), |i, j| cols[j][i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let f = |p: &[f64]| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2);
        let sol = nelder_mead(f, &[-1.2, 1.0], 0.5, 5000, 1e-16, None);
        assert!((sol.x[0] - 1.0).abs() < 1e-4 && (sol.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn nelder_mead_respects_bounds() {
        let b = BoxDomain::cube(1, 0.0, 1.0);
        let sol = nelder_mead(|p| (p[0] + 3.0).powi(2), &[0.5], 0.2, 500, 1e-14, Some(&b));
        assert!(sol.x[0] >= 0.0 && sol.x[0] < 1e-6);
    }

    #[test]
    fn gauss_newton_projects_onto_a_line() {
        // r(x, y) = x - y, min-norm projection from (1, 0) is (0.5, 0.5)
        let sys = |p: &[f64]| Some((vec![p[0] - p[1]], DMatrix::from_row_slice(1, 2, &[1.0, -1.0])));
        let sol = gauss_newton(sys, &[1.0, 0.0], 1e-14, 20);
        assert!(sol.value <= 1e-14);
        assert!((sol.x[0] - 0.5).abs() < 1e-14 && (sol.x[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gauss_newton_solves_square_root() {
        let sys = |p: &[f64]| Some((vec![p[0] * p[0] - 2.0], DMatrix::from_element(1, 1, 2.0 * p[0])));
        let sol = gauss_newton(sys, &[1.0], 1e-15, 50);
        assert!((sol.x[0] - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn fd_jacobian_of_product() {
        let j = fd_jacobian(|p| Some(vec![p[0] * p[1]]), &[2.0, 3.0], 1e-5).unwrap();
        assert!((j[(0, 0)] - 3.0).abs() < 1e-9 && (j[(0, 1)] - 2.0).abs() < 1e-9);
    }
}
