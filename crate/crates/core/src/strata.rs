//! Corank strata of 1-jets and the checkers built on them.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{per_axis_for_budget, BoxDomain};
use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::expr::{ExprMap, Wrt};
use crate::linalg::{rank_decide, schur_complement, schur_stratum_chart, singular_values, PivotBlock, TolPolicy};
use crate::optim::{gauss_newton, min_norm_solve, nelder_mead};

/// Finite-difference step for chart derivatives.
pub const CHART_STEP: f64 = 1e-5;

/// Cutoff used to decide the rank of chart derivatives and Hessians: tiny
/// but nonzero curvature must still count as degenerate.
pub const DEGENERACY_POLICY: TolPolicy = TolPolicy::Mixed {
    relative: 1e-8,
    absolute: 1e-6,
};

/// Smallest singular value below which a Jacobian counts as rank deficient
/// in immersion and corank searches.
pub const SINGULAR_TOL: f64 = 1e-8;

const SURVEY_POLICY: TolPolicy = TolPolicy::Mixed {
    relative: 1e-8,
    absolute: SINGULAR_TOL,
};

/// `(n - v + k)(l - v + k)` with `v = min(n, l)`.
pub fn stratum_codim(n: usize, l: usize, k: usize) -> Result<usize> {
    let v = n.min(l);
    if k == 0 || k > v {
        return Err(Error::InvalidInput(format!("corank {k} outside 1..={v}")));
    }
    Ok((n - v + k) * (l - v + k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumSpec {
    pub k: usize,
    pub n: usize,
    pub l: usize,
    pub codim: usize,
}

impl StratumSpec {
    pub fn new(n: usize, l: usize, k: usize) -> Result<Self> {
        Ok(Self {
            k,
            n,
            l,
            codim: stratum_codim(n, l, k)?,
        })
    }
}

/// The 1-jet of a map at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub jacobian: DMatrix<f64>,
}

fn require_plain(f: &ExprMap) -> Result<()> {
    if f.arity_a() != 0 {
        return Err(Error::InvalidInput(
            "expected a map without parameters; take a section first".into(),
        ));
    }
    Ok(())
}

pub fn jet_extension(f: &ExprMap, x: &[f64]) -> Result<JetPoint> {
    require_plain(f)?;
    let (y, jacobian) = f.eval_with_jacobian(x, &[], Wrt::X)?;
    Ok(JetPoint {
        x: x.to_vec(),
        y,
        jacobian,
    })
}

fn chart_values(f: &ExprMap, x: &[f64], pivots: &PivotBlock) -> Result<Vec<f64>> {
    let j = f.jacobian(x, &[], Wrt::X)?;
    Ok(schur_complement(&j, pivots)?.iter().copied().collect())
}

/// Defect of `j^1 f` against the corank-`k` stratum at `x`.
///
/// The stratum is described near `j^1 f(x)` by the Schur-complement chart
/// with pivots frozen at `x`; its derivative along `x` is taken by central
/// differences.
pub fn stratum_defect(f: &ExprMap, k: usize, x: &[f64]) -> Result<usize> {
    require_plain(f)?;
    let j = f.jacobian(x, &[], Wrt::X)?;
    let corank = rank_decide(&j, DEGENERACY_POLICY)?.corank;
    if corank != k {
        return Err(Error::Precondition(format!(
            "point has corank {corank}, not {k}"
        )));
    }
    let chart = schur_stratum_chart(&j, k)?;
    let codim = chart.values.len();
    let mut p = x.to_vec();
    let mut d = DMatrix::zeros(codim, x.len());
    for i in 0..x.len() {
        p[i] = x[i] + CHART_STEP;
        let plus = chart_values(f, &p, &chart.pivots)?;
        p[i] = x[i] - CHART_STEP;
        let minus = chart_values(f, &p, &chart.pivots)?;
        p[i] = x[i];
        for r in 0..codim {
            d[(r, i)] = (plus[r] - minus[r]) / (2.0 * CHART_STEP);
        }
    }
    let rank = rank_decide(&d, DEGENERACY_POLICY)?.rank;
    Ok(codim - rank)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MorseVerdict {
    Morse,
    NotMorse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: Vec<f64>,
    pub gradient_norm: f64,
    pub hessian_singular_values: Vec<f64>,
    pub hessian_det: f64,
    pub nondegenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseReport {
    pub verdict: MorseVerdict,
    pub critical_points: Vec<CriticalPoint>,
    pub degenerate_witnesses: Vec<Vec<f64>>,
    pub starts: usize,
}

/// Gradient threshold for accepting a critical point.
pub const CRITICAL_TOL: f64 = 1e-7;
const DEDUP_RADIUS: f64 = 1e-6;

/// Default number of Newton starts: 100 per unit of box volume.
pub fn default_morse_starts(domain: &BoxDomain) -> usize {
    ((100.0 * domain.volume()).ceil() as usize).clamp(16, 20_000)
}

fn gradient_system(f: &ExprMap, x: &[f64]) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let (_, g) = f.eval_with_jacobian(x, &[], Wrt::X).ok()?;
    let h = f.hessians(x, &[]).ok()?.pop()?;
    Some((g.iter().copied().collect(), h))
}

const NEWTON_ITERS: usize = 200;
/// Iterations without a new best gradient norm before a start is abandoned.
const NEWTON_PATIENCE: usize = 20;

/// Newton iteration on the gradient. Gives up once the iterate wanders a full
/// box width outside the domain or stops improving.
fn newton_critical(f: &ExprMap, x0: &[f64], domain: &BoxDomain) -> Option<Vec<f64>> {
    let widths = domain.widths();
    let escaped = |x: &[f64]| {
        x.iter()
            .zip(domain.lo.iter().zip(&domain.hi))
            .zip(&widths)
            .any(|((v, (lo, hi)), w)| *v < lo - w || *v > hi + w)
    };
    let mut x = x0.to_vec();
    let (mut best, mut best_norm, mut best_it) = (x.clone(), f64::INFINITY, 0);
    for it in 0..NEWTON_ITERS {
        let (g, h) = gradient_system(f, &x)?;
        let norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !norm.is_finite() {
            break;
        }
        if norm < best_norm {
            (best, best_norm, best_it) = (x.clone(), norm, it);
        }
        if norm <= CRITICAL_TOL * 1e-8 || it - best_it > NEWTON_PATIENCE {
            break;
        }
        let step = min_norm_solve(&h, &g)?;
        for (xi, si) in x.iter_mut().zip(step.iter()) {
            *xi -= si;
        }
        if escaped(&x) {
            break;
        }
    }
    (best_norm < CRITICAL_TOL && domain.contains_with_margin(&best, 1e-9)).then_some(best)
}

fn dedup(points: impl IntoIterator<Item = Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        let near = out.iter().any(|q| {
            q.iter().zip(&p).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) < DEDUP_RADIUS
        });
        if !near {
            out.push(p);
        }
    }
    out.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

/// Multistart Newton search for critical points of a scalar `f` on `domain`,
/// testing each one's Hessian for singularity.
pub fn morse_check(f: &ExprMap, domain: &BoxDomain, starts: Option<usize>) -> Result<MorseReport> {
    require_plain(f)?;
    if f.output_dim() != 1 {
        return Err(Error::Precondition(format!(
            "Morse check needs a scalar function, got {} components",
            f.output_dim()
        )));
    }
    let starts = starts.unwrap_or_else(|| default_morse_starts(domain));
    let per_axis = per_axis_for_budget(starts, domain.dim());
    let total = domain.grid_len(per_axis);
    let found = par_map(total, |i| newton_critical(f, &domain.grid_point(per_axis, i), domain));
    let mut critical_points = Vec::new();
    let mut degenerate_witnesses = Vec::new();
    for x in dedup(found.into_iter().flatten()) {
        let (_, g) = f.eval_with_jacobian(&x, &[], Wrt::X)?;
        let h = f.hessians(&x, &[])?.remove(0);
        let decision = rank_decide(&h, DEGENERACY_POLICY)?;
        let nondegenerate = decision.corank == 0;
        if !nondegenerate {
            degenerate_witnesses.push(x.clone());
        }
        critical_points.push(CriticalPoint {
            gradient_norm: g.norm(),
            hessian_det: h.determinant(),
            hessian_singular_values: decision.singular_values,
            nondegenerate,
            x,
        });
    }
    Ok(MorseReport {
        verdict: if degenerate_witnesses.is_empty() {
            MorseVerdict::Morse
        } else {
            MorseVerdict::NotMorse
        },
        critical_points,
        degenerate_witnesses,
        starts: total,
    })
}

/// Root-mean-square of the `k` smallest of the `min(n, l)` singular values.
fn small_sigma(f: &ExprMap, x: &[f64], k: usize) -> f64 {
    match f.jacobian(x, &[], Wrt::X).ok().and_then(|j| singular_values(&j).ok()) {
        Some(sv) if sv.len() >= k => sv[sv.len() - k..].iter().map(|s| s * s).sum::<f64>().sqrt(),
        _ => f64::INFINITY,
    }
}

/// Newton polish onto `{x : corank Jf(x) >= k}` using the null directions of
/// the current Jacobian and exact Hessians.
fn polish_rank_drop(f: &ExprMap, x0: &[f64], k: usize) -> Vec<f64> {
    let n = f.arity_x();
    let l = f.output_dim();
    let system = |x: &[f64]| -> Option<(Vec<f64>, DMatrix<f64>)> {
        let j = f.jacobian(x, &[], Wrt::X).ok()?;
        let hs = f.hessians(x, &[]).ok()?;
        let svd = j.clone().svd(true, true);
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        let mut res = Vec::new();
        let mut rows: Vec<DVector<f64>> = Vec::new();
        for &idx in order.iter().take(k) {
            if l >= n {
                // J v = 0 with v a right singular vector
                let v = svd.v_t.as_ref()?.row(idx).transpose();
                for (i, h) in hs.iter().enumerate() {
                    res.push((j.row(i) * &v)[0]);
                    rows.push(h * &v);
                }
            } else {
                // u^T J = 0 with u a left singular vector
                let u = svd.u.as_ref()?.column(idx).into_owned();
                let combo = (0..l).fold(DMatrix::zeros(n, n), |acc, i| acc + &hs[i] * u[i]);
                let r = j.transpose() * &u;
                for c in 0..n {
                    res.push(r[c]);
                    rows.push(combo.row(c).transpose());
                }
            }
        }
        let jac = DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]);
        Some((res, jac))
    };
    gauss_newton(system, x0, 1e-15, 30).x
}

/// Grid scan plus local minimisation of the `k` smallest singular values.
fn rank_drop_candidates(f: &ExprMap, domain: &BoxDomain, budget: usize, k: usize) -> Vec<Vec<f64>> {
    let per_axis = per_axis_for_budget(budget.max(1), domain.dim());
    let total = domain.grid_len(per_axis);
    let scores = par_map(total, |i| {
        let x = domain.grid_point(per_axis, i);
        (small_sigma(f, &x, k), i)
    });
    let mut scored: Vec<(f64, usize)> = scores.into_iter().filter(|s| s.0.is_finite()).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let step = 2.0 * domain.widths().iter().fold(0.0f64, |m, w| m.max(*w)) / per_axis as f64;
    let seeds: Vec<usize> = scored.iter().take(8).map(|s| s.1).collect();
    par_map(seeds.len(), |s| {
        let x0 = domain.grid_point(per_axis, seeds[s]);
        let nm = nelder_mead(|x| small_sigma(f, x, k), &x0, step.max(1e-6), 300, 1e-30, Some(domain));
        let polished = polish_rank_drop(f, &nm.x, k);
        if domain.contains_with_margin(&polished, 1e-9) && small_sigma(f, &polished, k) <= small_sigma(f, &nm.x, k) {
            polished
        } else {
            nm.x
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ImmersionVerdict {
    Immersion,
    NotImmersion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorankWitness {
    pub x: Vec<f64>,
    pub corank: usize,
    pub sigma_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmersionReport {
    pub verdict: ImmersionVerdict,
    pub corank_witnesses: Vec<CorankWitness>,
    /// Smallest singular value seen anywhere in the search.
    pub min_sigma: f64,
}

pub fn immersion_check(f: &ExprMap, domain: &BoxDomain, budget: usize) -> Result<ImmersionReport> {
    require_plain(f)?;
    let n = f.arity_x();
    if f.output_dim() < n {
        return Ok(ImmersionReport {
            verdict: ImmersionVerdict::NotImmersion,
            corank_witnesses: vec![CorankWitness {
                x: domain.center(),
                corank: n - f.output_dim(),
                sigma_min: 0.0,
            }],
            min_sigma: 0.0,
        });
    }
    let mut min_sigma = f64::INFINITY;
    let mut hits = Vec::new();
    for x in rank_drop_candidates(f, domain, budget, 1) {
        let s = small_sigma(f, &x, 1);
        min_sigma = min_sigma.min(s);
        if s < SINGULAR_TOL {
            hits.push(x);
        }
    }
    let mut corank_witnesses = Vec::new();
    for x in dedup(hits) {
        let j = f.jacobian(&x, &[], Wrt::X)?;
        let d = rank_decide(&j, SURVEY_POLICY)?;
        corank_witnesses.push(CorankWitness {
            sigma_min: d.singular_values.last().copied().unwrap_or(0.0),
            corank: d.corank.max(1),
            x,
        });
    }
    Ok(ImmersionReport {
        verdict: if corank_witnesses.is_empty() {
            ImmersionVerdict::Immersion
        } else {
            ImmersionVerdict::NotImmersion
        },
        corank_witnesses,
        min_sigma,
    })
}

/// Cross-cap test at a corank-1 point of `f: R^n -> R^{2n-1}`.
pub fn whitney_umbrella_check(f: &ExprMap, x_singular: &[f64]) -> Result<bool> {
    require_plain(f)?;
    let n = f.arity_x();
    if n < 2 || f.output_dim() != 2 * n - 1 {
        return Err(Error::Precondition(format!(
            "cross-cap test needs R^n -> R^(2n-1) with n >= 2, got R^{n} -> R^{}",
            f.output_dim()
        )));
    }
    let j = f.jacobian(x_singular, &[], Wrt::X)?;
    let corank = rank_decide(&j, TolPolicy::default())?.corank;
    if corank != 1 {
        return Err(Error::Precondition(format!(
            "cross-cap test needs a corank-1 point, found corank {corank}"
        )));
    }
    Ok(stratum_defect(f, 1, x_singular)? == 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorankSurvey {
    /// Corank -> number of grid nodes with that corank.
    pub histogram: BTreeMap<usize, usize>,
    pub max_corank: usize,
    /// Highest-corank point found for each corank level reached.
    pub witnesses: Vec<CorankWitness>,
}

/// Histogram of Jacobian coranks on a grid, plus refinement toward every
/// corank level up to `max_target` (or `min(n, l)`).
pub fn corank_survey(f: &ExprMap, domain: &BoxDomain, budget: usize, max_target: Option<usize>) -> Result<CorankSurvey> {
    require_plain(f)?;
    let v = f.arity_x().min(f.output_dim());
    let per_axis = per_axis_for_budget(budget.max(1), domain.dim());
    let total = domain.grid_len(per_axis);
    let coranks = par_map(total, |i| -> Result<(usize, Vec<f64>, f64)> {
        let x = domain.grid_point(per_axis, i);
        let d = rank_decide(&f.jacobian(&x, &[], Wrt::X)?, SURVEY_POLICY)?;
        let s = d.singular_values.last().copied().unwrap_or(0.0);
        Ok((d.corank, x, s))
    });
    let mut histogram = BTreeMap::new();
    let mut best: BTreeMap<usize, CorankWitness> = BTreeMap::new();
    let record = |corank: usize, x: Vec<f64>, sigma_min: f64, best: &mut BTreeMap<usize, CorankWitness>| {
        if corank > 0 {
            best.entry(corank).or_insert(CorankWitness { x, corank, sigma_min });
        }
    };
    for c in coranks {
        let (corank, x, s) = c?;
        *histogram.entry(corank).or_insert(0) += 1;
        record(corank, x, s, &mut best);
    }
    for k in 1..=max_target.unwrap_or(v).min(v) {
        for x in rank_drop_candidates(f, domain, budget.min(4096), k) {
            let d = rank_decide(&f.jacobian(&x, &[], Wrt::X)?, SURVEY_POLICY)?;
            let s = d.singular_values.last().copied().unwrap_or(0.0);
            record(d.corank, x, s, &mut best);
        }
    }
    let max_corank = best.keys().next_back().copied().unwrap_or(0);
    Ok(CorankSurvey {
        histogram,
        max_corank,
        witnesses: best.into_values().collect(),
    })
}
