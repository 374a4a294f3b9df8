//! Numerical rank decisions and local charts for corank strata.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LinalgError, Result};
use crate::expr::{ExprMap, Wrt};

/// How the singular-value cutoff is derived from a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TolPolicy {
    /// `tau * sigma_max * max(rows, cols)`.
    Relative(f64),
    /// A fixed cutoff.
    Absolute(f64),
    /// The larger of the relative and absolute cutoffs.
    Mixed { relative: f64, absolute: f64 },
}

impl Default for TolPolicy {
    fn default() -> Self {
        TolPolicy::Relative(1e-8)
    }
}

impl TolPolicy {
    pub fn tolerance(&self, sigma_max: f64, rows: usize, cols: usize) -> f64 {
        let scale = rows.max(cols) as f64;
        match *self {
            TolPolicy::Relative(tau) => tau * sigma_max * scale,
            TolPolicy::Absolute(eps) => eps,
            TolPolicy::Mixed { relative, absolute } => (relative * sigma_max * scale).max(absolute),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDecision {
    pub rank: usize,
    pub corank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub tolerance_used: f64,
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite.into())
    }
}

/// Singular values in descending order (empty for an empty matrix).
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_finite(m)?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

pub fn rank_decide(m: &DMatrix<f64>, policy: TolPolicy) -> Result<RankDecision> {
    let singular_values = singular_values(m)?;
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let tolerance_used = policy.tolerance(sigma_max, m.nrows(), m.ncols());
    let rank = singular_values.iter().filter(|&&s| s > tolerance_used).count();
    Ok(RankDecision {
        rank,
        corank: m.nrows().min(m.ncols()) - rank,
        singular_values,
        tolerance_used,
    })
}

/// Smallest of the `min(rows, cols)` singular values.
pub fn sigma_min(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?.last().copied().unwrap_or(0.0))
}

/// Corank of the state Jacobian of `map` at `(x, a)`.
pub fn corank_of_jacobian(map: &ExprMap, x: &[f64], a: &[f64], policy: TolPolicy) -> Result<usize> {
    let j = map.jacobian(x, a, Wrt::X)?;
    Ok(rank_decide(&j, policy)?.corank)
}

/// Moore-Penrose pseudo-inverse with singular values below `eps` dropped.
pub fn pseudo_inverse(m: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    check_finite(m)?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(DMatrix::zeros(m.ncols(), m.nrows()));
    }
    m.clone()
        .pseudo_inverse(eps)
        .map_err(|e| LinalgError::Shape(e.to_string()).into())
}

/// Rows and columns of an invertible pivot block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotBlock {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

/// Picks a `size x size` pivot block by greedy complete-pivoting elimination.
pub fn select_pivots(m: &DMatrix<f64>, size: usize) -> Result<PivotBlock> {
    check_finite(m)?;
    if size > m.nrows().min(m.ncols()) {
        return Err(LinalgError::NoPivot { required: size }.into());
    }
    let scale = m.amax().max(1.0);
    let threshold = 1e-12 * scale;
    let mut work = m.clone();
    let mut free_rows: Vec<usize> = (0..m.nrows()).collect();
    let mut free_cols: Vec<usize> = (0..m.ncols()).collect();
    let mut block = PivotBlock {
        rows: Vec::with_capacity(size),
        cols: Vec::with_capacity(size),
    };
    for _ in 0..size {
        let mut best = (0, 0, 0.0f64);
        for (ri, &r) in free_rows.iter().enumerate() {
            for (ci, &c) in free_cols.iter().enumerate() {
                let v = work[(r, c)].abs();
                if v > best.2 {
                    best = (ri, ci, v);
                }
            }
        }
        if best.2 <= threshold {
            return Err(LinalgError::NoPivot { required: size }.into());
        }
        let pr = free_rows.remove(best.0);
        let pc = free_cols.remove(best.1);
        let pivot = work[(pr, pc)];
        for &r in &free_rows {
            let factor = work[(r, pc)] / pivot;
            if factor != 0.0 {
                for &c in &free_cols {
                    work[(r, c)] -= factor * work[(pr, c)];
                }
                work[(r, pc)] = 0.0;
            }
        }
        block.rows.push(pr);
        block.cols.push(pc);
    }
    block.rows.sort_unstable();
    block.cols.sort_unstable();
    Ok(block)
}

fn complement(indices: &[usize], len: usize) -> Vec<usize> {
    (0..len).filter(|i| !indices.contains(i)).collect()
}

/// `D - C A^{-1} B` for the partition of `m` induced by `block`.
pub fn schur_complement(m: &DMatrix<f64>, block: &PivotBlock) -> Result<DMatrix<f64>> {
    check_finite(m)?;
    let rc = complement(&block.rows, m.nrows());
    let cc = complement(&block.cols, m.ncols());
    let pick = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
    };
    let d = pick(&rc, &cc);
    if block.rows.is_empty() {
        return Ok(d);
    }
    let a = pick(&block.rows, &block.cols);
    let b = pick(&block.rows, &cc);
    let c = pick(&rc, &block.cols);
    let a_inv_b = a.lu().solve(&b).ok_or(LinalgError::NoPivot {
        required: block.rows.len(),
    })?;
    Ok(d - c * a_inv_b)
}

/// Local defining equations of the corank-`k` set around `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumChart {
    pub pivots: PivotBlock,
    /// `(rows - v + k) x (cols - v + k)` with `v = min(rows, cols)`.
    pub values: DMatrix<f64>,
}

pub fn schur_stratum_chart(m: &DMatrix<f64>, k: usize) -> Result<StratumChart> {
    let v = m.nrows().min(m.ncols());
    if k > v {
        return Err(LinalgError::Shape(format!("corank {k} exceeds min dimension {v}")).into());
    }
    let pivots = select_pivots(m, v - k)?;
    let values = schur_complement(m, &pivots)?;
    Ok(StratumChart { pivots, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_matrix_has_full_corank() {
        let d = rank_decide(&DMatrix::zeros(3, 3), TolPolicy::default()).unwrap();
        assert_eq!((d.rank, d.corank), (0, 3));
    }

    #[test]
    fn relative_tolerance_by_hand() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1e-14]));
        let d = rank_decide(&m, TolPolicy::Relative(1e-10)).unwrap();
        assert_eq!(d.rank, 1);
        assert_eq!(d.tolerance_used, 1e-10 * 1.0 * 2.0);
    }

    #[test]
    fn mixed_policy_takes_the_larger_cutoff() {
        let p = TolPolicy::Mixed {
            relative: 1e-8,
            absolute: 1e-6,
        };
        assert_eq!(p.tolerance(1.0, 1, 1), 1e-6);
        assert_eq!(p.tolerance(1e3, 1, 1), 1e-5);
    }

    #[test]
    fn non_finite_rejected() {
        let m = DMatrix::from_element(2, 2, f64::NAN);
        assert!(rank_decide(&m, TolPolicy::default()).is_err());
    }

    #[test]
    fn jacobian_coranks() {
        let f = ExprMap::parse("[x1^2 + x2^2, x1^2 + x2^2]", 2, 0).unwrap();
        assert_eq!(corank_of_jacobian(&f, &[0.0, 0.0], &[], TolPolicy::default()).unwrap(), 2);
        let inc = ExprMap::parse("[x1, x2, 0]", 2, 0).unwrap();
        assert_eq!(corank_of_jacobian(&inc, &[0.3, 2.0], &[], TolPolicy::default()).unwrap(), 0);
        let nf = ExprMap::parse("[x1^2, x1*x2, x2]", 2, 0).unwrap();
        assert_eq!(corank_of_jacobian(&nf, &[0.0, 0.0], &[], TolPolicy::default()).unwrap(), 1);
        let sq = ExprMap::parse("[x1^2, x1^2, x1^2]", 1, 0).unwrap();
        assert_eq!(corank_of_jacobian(&sq, &[0.0], &[], TolPolicy::default()).unwrap(), 1);
    }

    #[test]
    fn schur_chart_by_hand() {
        let s = 0.25;
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, s]);
        let chart = schur_stratum_chart(&m, 1).unwrap();
        assert_eq!(chart.values.shape(), (1, 1));
        assert_eq!(chart.values[(0, 0)], s);
        let m0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(schur_stratum_chart(&m0, 1).unwrap().values[(0, 0)], 0.0);
    }

    #[test]
    fn identity_is_off_the_stratum() {
        for v in 1..5 {
            let chart = schur_stratum_chart(&DMatrix::identity(v, v), 1).unwrap();
            assert!(chart.values.amax() > 0.5);
        }
    }

    #[test]
    fn equal_columns_give_vanishing_chart() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, -3.0, -3.0]);
        let chart = schur_stratum_chart(&m, 1).unwrap();
        assert_eq!(chart.values.shape(), (2, 1));
        assert!(chart.values.amax() < 1e-14);
        // brute force: every 2x2 minor vanishes
        for (r1, r2) in [(0, 1), (0, 2), (1, 2)] {
            let det = m[(r1, 0)] * m[(r2, 1)] - m[(r1, 1)] * m[(r2, 0)];
            assert_eq!(det, 0.0);
        }
    }

    #[test]
    fn no_pivot_for_zero_matrix() {
        assert!(schur_stratum_chart(&DMatrix::zeros(2, 3), 1).is_err());
        assert!(schur_stratum_chart(&DMatrix::zeros(2, 3), 2).is_ok());
    }

    fn random_orthogonal(n: usize, seed: &[f64]) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |i, j| seed[(i * n + j) % seed.len()] + if i == j { 3.0 } else { 0.0 });
        m.qr().q()
    }

    fn planted(rows: usize, cols: usize, rank: usize, entries: &[f64]) -> DMatrix<f64> {
        let u = DMatrix::from_fn(rows, rank, |i, j| entries[(i * 7 + j * 3) % entries.len()]);
        let v = DMatrix::from_fn(rank, cols, |i, j| entries[(i * 5 + j * 11 + 1) % entries.len()]);
        u * v
    }

    proptest! {
        #[test]
        fn rank_is_rotation_invariant(
            entries in prop::collection::vec(-1.0f64..1.0, 32),
            rot in prop::collection::vec(-1.0f64..1.0, 16),
        ) {
            let m = DMatrix::from_fn(4, 4, |i, j| entries[i * 4 + j]);
            let q1 = random_orthogonal(4, &rot);
            let q2 = random_orthogonal(4, &entries[16..]);
            let base = rank_decide(&m, TolPolicy::default()).unwrap();
            let turned = rank_decide(&(&q1 * &m * &q2), TolPolicy::default()).unwrap();
            prop_assert_eq!(base.rank, turned.rank);
            for (a, b) in base.singular_values.iter().zip(&turned.singular_values) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn planted_rank_is_recovered(
            entries in prop::collection::vec(0.5f64..2.0, 24),
            noise in prop::collection::vec(-1.0f64..1.0, 20),
            rank in 1usize..4,
        ) {
            let m = planted(5, 4, rank, &entries);
            let sv = singular_values(&m).unwrap();
            prop_assume!(sv[rank - 1] > 1e-3 * sv[0]);
            let policy = TolPolicy::default();
            let tol = policy.tolerance(sv[0], 5, 4);
            let e = DMatrix::from_fn(5, 4, |i, j| noise[i * 4 + j]);
            let e = &e / e.norm().max(1e-300);
            let small = &m + &e * (tol / 10.0);
            prop_assert_eq!(rank_decide(&small, policy).unwrap().rank, rank);
            let big = &m + DMatrix::<f64>::identity(5, 4) * (tol * 1e4);
            prop_assert_eq!(rank_decide(&big, policy).unwrap().rank, 4);
        }

        #[test]
        fn chart_vanishes_exactly_on_corank_set(
            entries in prop::collection::vec(0.5f64..2.0, 24),
            bump in -1.0f64..1.0,
        ) {
            let m = planted(3, 3, 2, &entries);
            let sv = singular_values(&m).unwrap();
            prop_assume!(sv[1] > 1e-3 * sv[0]);
            let policy = TolPolicy::default();
            let chart = schur_stratum_chart(&m, 1).unwrap();
            let tol = policy.tolerance(sv[0], 3, 3);
            prop_assert!(chart.values.amax() < tol);
            prop_assert_eq!(rank_decide(&m, policy).unwrap().corank, 1);
            let (u, _, vt) = { let s = m.clone().svd(true, true); (s.u.unwrap(), s.singular_values, s.v_t.unwrap()) };
            let idx = (0..3).min_by(|&a, &b| sv_of(&m, a).total_cmp(&sv_of(&m, b))).unwrap();
            let shift = 0.1 * (1.0 + bump.abs()) * sv[0];
            let off = &m + u.column(idx) * vt.row(idx) * shift;
            let c2 = schur_complement(&off, &chart.pivots).unwrap();
            prop_assert!(c2.amax() > tol);
            prop_assert_eq!(rank_decide(&off, policy).unwrap().corank, 0);
        }
    }

    fn sv_of(m: &DMatrix<f64>, idx: usize) -> f64 {
        m.clone().svd(false, false).singular_values[idx]
    }
}
