//! Strongly convex multiobjective problems: weighted-sum scalarization over
//! the weight simplex, Pareto membership, simpliciality evidence, and
//! genericity studies under linear perturbation.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dimension::{box_count, BoxCountEstimate, ScaleSpec, MIN_POINTS};
use crate::domain::{per_axis_for_budget, BoxDomain};
use crate::error::{Error, Result};
use crate::exec::{par_map, substream};
use crate::expr::{ExprMap, Wrt};
use crate::linalg::{rank_decide, TolPolicy};
use crate::optim::min_norm_solve;
use crate::perturb::LinearPerturbation;
use crate::strata::corank_survey;
use crate::transversality::{genericity_threshold, SBound, ThresholdQuery};

pub const NEWTON_MAX_ITER: usize = 200;
pub const GRADIENT_TOL: f64 = 1e-10;
pub const BACKTRACK: f64 = 0.5;
/// Minimizers closer than this count as the same point.
pub const SEPARATION_TOL: f64 = 1e-8;
const MAX_OBJECTIVES: usize = 16;
const PROBE_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// `f = (f_1, ..., f_l): R^m -> R^l` restricted to a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiObjective {
    pub map: ExprMap,
    pub domain: BoxDomain,
    pub alpha_hat: Option<f64>,
}

impl MultiObjective {
    pub fn new(map: ExprMap, domain: BoxDomain) -> Result<Self> {
        if map.arity_a() != 0 {
            return Err(Error::InvalidInput("objectives must not depend on parameters".into()));
        }
        if map.output_dim() == 0 || map.output_dim() > MAX_OBJECTIVES {
            return Err(Error::InvalidInput(format!(
                "between 1 and {MAX_OBJECTIVES} objectives are supported, got {}",
                map.output_dim()
            )));
        }
        if domain.dim() != map.arity_x() {
            return Err(Error::InvalidInput(format!(
                "box has dimension {} but objectives take {} variables",
                domain.dim(),
                map.arity_x()
            )));
        }
        Ok(Self {
            map,
            domain,
            alpha_hat: None,
        })
    }

    pub fn parse(source: &str, m: usize, domain: BoxDomain) -> Result<Self> {
        Self::new(ExprMap::parse(source, m, 0)?, domain)
    }

    pub fn objectives(&self) -> usize {
        self.map.output_dim()
    }

    pub fn dim(&self) -> usize {
        self.map.arity_x()
    }

    /// The subproblem `f_I`.
    pub fn restrict(&self, support: &[usize]) -> Self {
        Self {
            map: self.map.select(support),
            domain: self.domain.clone(),
            alpha_hat: self.alpha_hat,
        }
    }

    /// `f + pi`. The convexity estimate carries over unchanged.
    pub fn perturbed(&self, pi: &LinearPerturbation) -> Result<Self> {
        Ok(Self {
            map: self.map.add_linear(&pi.matrix)?,
            domain: self.domain.clone(),
            alpha_hat: self.alpha_hat,
        })
    }

    pub fn with_convexity_estimate(mut self, samples: usize) -> Result<Self> {
        self.alpha_hat = Some(strong_convexity_estimate(&self, samples)?.alpha_hat);
        Ok(self)
    }

    fn values(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.map.eval(x, &[]).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityEstimate {
    pub alpha_hat: f64,
    pub strongly_convex: bool,
    pub samples: usize,
    /// Sample point and component attaining the minimum eigenvalue.
    pub argmin: Vec<f64>,
    pub component: usize,
}

fn min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    let sym = (h + h.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v))
}

/// Smallest Hessian eigenvalue over a grid of about `samples` points and all
/// components.
pub fn strong_convexity_estimate(f: &MultiObjective, samples: usize) -> Result<ConvexityEstimate> {
    let per_axis = per_axis_for_budget(samples.max(1), f.dim());
    let total = f.domain.grid_len(per_axis);
    let mins = par_map(total, |i| -> Result<(f64, usize)> {
        let x = f.domain.grid_point(per_axis, i);
        let hs = f.map.hessians(&x, &[])?;
        Ok(hs
            .iter()
            .enumerate()
            .map(|(c, h)| (min_eigenvalue(h), c))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a }))
    });
    let mut best = (f64::INFINITY, 0, 0);
    for (i, r) in mins.into_iter().enumerate() {
        let (v, c) = r?;
        if v < best.0 {
            best = (v, c, i);
        }
    }
    Ok(ConvexityEstimate {
        alpha_hat: best.0,
        strongly_convex: best.0 > 0.0,
        samples: total,
        argmin: f.domain.grid_point(per_axis, best.2),
        component: best.1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarizedMin {
    pub x: Vec<f64>,
    pub gradient_norm: f64,
    pub iterations: usize,
}

fn scalarized_parts(f: &MultiObjective, w: &[f64], x: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    let (vals, jac) = f.map.eval_with_jacobian(x, &[], Wrt::X)?;
    let hs = f.map.hessians(x, &[])?;
    let m = f.dim();
    let mut value = 0.0;
    let mut grad = DVector::zeros(m);
    let mut hess = DMatrix::zeros(m, m);
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        value += wi * vals[i];
        grad += jac.row(i).transpose() * wi;
        hess += &hs[i] * wi;
    }
    Ok((value, grad, hess))
}

fn scalarized_value(f: &MultiObjective, w: &[f64], x: &[f64]) -> Option<f64> {
    let vals = f.values(x)?;
    Some(w.iter().zip(&vals).filter(|(w, _)| **w != 0.0).map(|(w, v)| w * v).sum())
}

fn check_weights(f: &MultiObjective, w: &[f64]) -> Result<()> {
    if w.len() != f.objectives() || w.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(Error::InvalidInput(format!(
            "weights must be {} non-negative numbers",
            f.objectives()
        )));
    }
    if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput("weights must sum to 1".into()));
    }
    Ok(())
}

/// Minimizer of `sum_i w_i f_i`, by damped Newton from the box center.
pub fn scalarize_min(f: &MultiObjective, w: &[f64]) -> Result<ScalarizedMin> {
    scalarize_min_from(f, w, &f.domain.center())
}

pub fn scalarize_min_from(f: &MultiObjective, w: &[f64], x0: &[f64]) -> Result<ScalarizedMin> {
    check_weights(f, w)?;
    if let Some(a) = f.alpha_hat {
        if a.is_nan() || a <= 0.0 {
            return Err(Error::Precondition(format!(
                "scalarization needs a strongly convex problem, alpha_hat = {a}"
            )));
        }
    }
    let alpha = f.alpha_hat.unwrap_or(1.0);
    let mut x = DVector::from_column_slice(x0);
    for it in 0..NEWTON_MAX_ITER {
        let (value, grad, hess) = scalarized_parts(f, w, x.as_slice())?;
        let gnorm = grad.norm();
        if gnorm <= GRADIENT_TOL {
            return finish(f, x, gnorm, it);
        }
        let dir = match hess.clone().cholesky() {
            Some(ch) => -ch.solve(&grad),
            None => -&grad / alpha,
        };
        let slope = grad.dot(&dir);
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let cand = &x + &dir * t;
            if let Some(v) = scalarized_value(f, w, cand.as_slice()) {
                if v <= value + 1e-4 * t * slope {
                    next = Some(cand);
                    break;
                }
            }
            t *= BACKTRACK;
        }
        let next = match next {
            Some(n) => n,
            None => {
                // Rounding can hide the decrease near the minimizer; take the
                // full step if it shrinks the gradient.
                let cand = &x + &dir;
                let (_, g2, _) = scalarized_parts(f, w, cand.as_slice())?;
                if g2.norm() < gnorm {
                    cand
                } else {
                    break;
                }
            }
        };
        x = next;
    }
    let (_, grad, _) = scalarized_parts(f, w, x.as_slice())?;
    if grad.norm() <= GRADIENT_TOL {
        return finish(f, x, grad.norm(), NEWTON_MAX_ITER);
    }
    Err(Error::Solver(format!(
        "Newton did not reach gradient {GRADIENT_TOL:e} (last {:e}) for w = {w:?}",
        grad.norm()
    )))
}

fn finish(f: &MultiObjective, x: DVector<f64>, gradient_norm: f64, iterations: usize) -> Result<ScalarizedMin> {
    let x: Vec<f64> = x.iter().copied().collect();
    if !f.domain.contains_with_margin(&x, 1e-9) {
        return Err(Error::Solver(format!(
            "scalarized minimizer {x:?} lies outside the box; enlarge the domain"
        )));
    }
    Ok(ScalarizedMin {
        x,
        gradient_norm,
        iterations,
    })
}

/// Minimum-norm point of the convex hull of the rows of `g`.
fn min_norm_hull_point(g: &DMatrix<f64>) -> DVector<f64> {
    let l = g.nrows();
    let mut best: Option<DVector<f64>> = None;
    for mask in 1u32..(1 << l) {
        let idx: Vec<usize> = (0..l).filter(|i| mask & (1 << i) != 0).collect();
        let cand = if idx.len() == 1 {
            g.row(idx[0]).transpose()
        } else {
            let k = idx.len();
            let mut kkt = DMatrix::zeros(k + 1, k + 1);
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    kkt[(a, b)] = g.row(i).dot(&g.row(j));
                }
                kkt[(a, k)] = 1.0;
                kkt[(k, a)] = 1.0;
            }
            let mut rhs = vec![0.0; k + 1];
            rhs[k] = 1.0;
            let Some(sol) = min_norm_solve(&kkt, &rhs) else { continue };
            if sol.iter().take(k).any(|w| *w < -1e-12) {
                continue;
            }
            idx.iter().enumerate().fold(DVector::zeros(g.ncols()), |acc, (a, &i)| {
                acc + g.row(i).transpose() * sol[a].max(0.0)
            })
        };
        if best.as_ref().is_none_or(|b| cand.norm() < b.norm()) {
            best = Some(cand);
        }
    }
    best.unwrap_or_else(|| DVector::zeros(g.ncols()))
}

fn dominates(fy: &[f64], fx: &[f64]) -> bool {
    fy.iter().zip(fx).all(|(a, b)| a <= b)
        && fy.iter().zip(fx).any(|(a, b)| *a < *b - 1e-9 * (1.0 + b.abs()))
}

/// One-sided test: `false` only when a dominating point was actually found.
///
/// First tries a common descent step along the negated minimum-norm element
/// of the gradients' convex hull, then `probe_budget` random probes (half
/// local, half box-wide).
pub fn pareto_membership(f: &MultiObjective, x: &[f64], probe_budget: usize) -> bool {
    let Ok((fx, jac)) = f.map.eval_with_jacobian(x, &[], Wrt::X) else {
        return true;
    };
    let d = -min_norm_hull_point(&jac);
    let gmax = (0..jac.nrows()).map(|i| jac.row(i).norm()).fold(0.0f64, f64::max);
    let dn2 = d.norm_squared();
    if d.norm() > 1e-8 * (1.0 + gmax) {
        let mut t = 1.0;
        for _ in 0..60 {
            let mut y: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + t * b).collect();
            f.domain.clamp(&mut y);
            if let Some(fy) = f.values(&y) {
                if fy.iter().zip(&fx).all(|(a, b)| *a < *b - 1e-4 * t * dn2) {
                    return false;
                }
            }
            t *= BACKTRACK;
        }
    }
    let mut rng = substream(PROBE_SEED, 0);
    let radius = 0.05 * f.domain.diameter();
    for i in 0..probe_budget {
        let y = if i % 2 == 0 {
            let mut y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-radius..=radius)).collect();
            f.domain.clamp(&mut y);
            y
        } else {
            f.domain.sample_uniform(&mut rng)
        };
        if let Some(fy) = f.values(&y) {
            if dominates(&fy, &fx) {
                return false;
            }
        }
    }
    true
}

/// All weights with coordinates in `{0, 1/k, ..., 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSimplexGrid {
    pub l: usize,
    pub resolution: usize,
    pub nodes: Vec<Vec<f64>>,
    /// Support `{i : w_i > 0}` of each node.
    pub supports: Vec<Vec<usize>>,
}

fn compositions(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

impl WeightSimplexGrid {
    pub fn new(l: usize, resolution: usize) -> Result<Self> {
        if l == 0 || resolution == 0 {
            return Err(Error::InvalidInput("simplex grid needs l >= 1 and k >= 1".into()));
        }
        let mut counts = Vec::new();
        compositions(resolution, l, &mut Vec::new(), &mut counts);
        let k = resolution as f64;
        let nodes = counts
            .iter()
            .map(|c| c.iter().map(|&v| v as f64 / k).collect())
            .collect();
        let supports = counts
            .iter()
            .map(|c| (0..l).filter(|&i| c[i] > 0).collect())
            .collect();
        Ok(Self {
            l,
            resolution,
            nodes,
            supports,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Distinct supports, ordered by size then lexicographically.
    pub fn faces(&self) -> Vec<Vec<usize>> {
        let mut faces = self.supports.clone();
        faces.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        faces.dedup();
        faces
    }
}

fn mask(support: &[usize]) -> u32 {
    support.iter().fold(0, |m, i| m | (1 << i))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoAtlas {
    pub grid: WeightSimplexGrid,
    pub minimizers: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

impl ParetoAtlas {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let l = self.grid.l;
        let m = self.minimizers.first().map_or(0, Vec::len);
        let header: Vec<String> = (1..=l)
            .map(|i| format!("w{i}"))
            .chain((1..=m).map(|i| format!("x{i}")))
            .chain((1..=l).map(|i| format!("f{i}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for ((w, x), v) in self.grid.nodes.iter().zip(&self.minimizers).zip(&self.values) {
            let row: Vec<String> = w.iter().chain(x).chain(v).map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Scalarized minimizer at every node of the resolution-`k` weight grid.
pub fn build_pareto_atlas(f: &MultiObjective, resolution: usize) -> Result<ParetoAtlas> {
    let grid = WeightSimplexGrid::new(f.objectives(), resolution)?;
    let solved = par_map(grid.len(), |i| -> Result<(Vec<f64>, Vec<f64>)> {
        let w = &grid.nodes[i];
        let sol = scalarize_min(f, w).map_err(|e| Error::Solver(format!("atlas node {i} (w = {w:?}): {e}")))?;
        let v = f.map.eval(&sol.x, &[])?;
        Ok((sol.x, v))
    });
    let mut minimizers = Vec::with_capacity(grid.len());
    let mut values = Vec::with_capacity(grid.len());
    for r in solved {
        let (x, v) = r?;
        minimizers.push(x);
        values.push(v);
    }
    Ok(ParetoAtlas {
        grid,
        minimizers,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimplicialityWitness {
    /// A node's minimizer was dominated within its face subproblem.
    NotPareto {
        node: usize,
        support: Vec<usize>,
        x: Vec<f64>,
    },
    /// Two different weights on one face share a minimizer.
    CollidingMinimizers {
        nodes: [usize; 2],
        weights: [Vec<f64>; 2],
        x: Vec<f64>,
    },
    /// Two different minimizers on one face share objective values.
    CollidingValues {
        nodes: [usize; 2],
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SimplicialityVerdict {
    SimplicialEvidence,
    WeaklySimplicialEvidence,
    Failed { witness: SimplicialityWitness },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankViolation {
    pub node: usize,
    pub x: Vec<f64>,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceReport {
    pub support: Vec<usize>,
    pub nodes: usize,
    pub pareto_ok: bool,
    pub minimizers_injective: bool,
    pub values_injective: bool,
    /// Every node of a face with two or more objectives maps to one point.
    pub collapsed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplicialityReport {
    /// `false` when `m < l`, where the rank criterion does not apply.
    pub rank_condition_applicable: bool,
    pub rank_condition_ok: bool,
    /// Jacobian rank at every node, in node order.
    pub ranks: Vec<usize>,
    pub rank_violations: Vec<RankViolation>,
    pub face_consistency_ok: bool,
    pub injectivity_ok: bool,
    pub faces: Vec<FaceReport>,
    pub verdict: SimplicialityVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplicialityOptions {
    pub probe_budget: usize,
    pub rank_policy: TolPolicy,
}

impl Default for SimplicialityOptions {
    fn default() -> Self {
        Self {
            probe_budget: 64,
            rank_policy: TolPolicy::default(),
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
}

/// Index pairs whose points lie within `tol`, found by a sweep on the first
/// coordinate.
fn close_pairs(points: &[Vec<f64>], tol: f64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(a.cmp(&b)));
    let mut pairs = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if points[j][0] - points[i][0] >= tol {
                break;
            }
            if dist(&points[i], &points[j]) < tol {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Sampled evidence for simpliciality of the atlas's problem: the rank
/// criterion at every node, Pareto membership per face subproblem, and
/// injectivity of both the weight-to-minimizer and minimizer-to-value maps.
pub fn simpliciality_check(
    f: &MultiObjective,
    atlas: &ParetoAtlas,
    opts: &SimplicialityOptions,
) -> Result<SimplicialityReport> {
    let l = f.objectives();
    let grid = &atlas.grid;
    let ranks = par_map(grid.len(), |i| -> Result<usize> {
        let j = f.map.jacobian(&atlas.minimizers[i], &[], Wrt::X)?;
        Ok(rank_decide(&j, opts.rank_policy)?.rank)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let applicable = f.dim() >= l;
    let want = l - 1;
    let rank_violations: Vec<RankViolation> = if applicable {
        ranks
            .iter()
            .enumerate()
            .filter(|(_, r)| **r != want)
            .map(|(node, &rank)| RankViolation {
                node,
                x: atlas.minimizers[node].clone(),
                rank,
            })
            .collect()
    } else {
        Vec::new()
    };
    let rank_condition_ok = applicable && rank_violations.is_empty();

    let membership = par_map(grid.len(), |i| {
        let sub = f.restrict(&grid.supports[i]);
        pareto_membership(&sub, &atlas.minimizers[i], opts.probe_budget)
    });

    let masks: Vec<u32> = grid.supports.iter().map(|s| mask(s)).collect();
    let x_pairs: Vec<(usize, usize)> = close_pairs(&atlas.minimizers, SEPARATION_TOL)
        .into_iter()
        .filter(|&(i, j)| grid.nodes[i] != grid.nodes[j])
        .collect();
    let value_scale = atlas
        .values
        .iter()
        .flatten()
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let v_pairs: Vec<(usize, usize)> = close_pairs(&atlas.values, 1e-12 * value_scale)
        .into_iter()
        .filter(|&(i, j)| dist(&atlas.minimizers[i], &atlas.minimizers[j]) >= SEPARATION_TOL)
        .collect();

    let mut witness: Option<SimplicialityWitness> = None;
    let mut faces = Vec::new();
    for support in grid.faces() {
        let fm = mask(&support);
        let inside = |i: usize| masks[i] & !fm == 0;
        let members: Vec<usize> = (0..grid.len()).filter(|&i| inside(i)).collect();
        let bad_member = members.iter().copied().find(|&i| masks[i] == fm && !membership[i]);
        let x_clash = x_pairs.iter().copied().find(|&(i, j)| inside(i) && inside(j));
        let v_clash = v_pairs.iter().copied().find(|&(i, j)| inside(i) && inside(j));
        let collapsed = support.len() >= 2
            && members
                .iter()
                .all(|&i| dist(&atlas.minimizers[i], &atlas.minimizers[members[0]]) < SEPARATION_TOL);
        if witness.is_none() {
            witness = bad_member
                .map(|node| SimplicialityWitness::NotPareto {
                    node,
                    support: support.clone(),
                    x: atlas.minimizers[node].clone(),
                })
                .or_else(|| {
                    x_clash.map(|(i, j)| SimplicialityWitness::CollidingMinimizers {
                        nodes: [i, j],
                        weights: [grid.nodes[i].clone(), grid.nodes[j].clone()],
                        x: atlas.minimizers[i].clone(),
                    })
                })
                .or_else(|| {
                    v_clash.map(|(i, j)| SimplicialityWitness::CollidingValues {
                        nodes: [i, j],
                        values: atlas.values[i].clone(),
                    })
                });
        }
        faces.push(FaceReport {
            support,
            nodes: members.len(),
            pareto_ok: bad_member.is_none(),
            minimizers_injective: x_clash.is_none(),
            values_injective: v_clash.is_none(),
            collapsed,
        });
    }
    let face_consistency_ok = faces.iter().all(|f| f.pareto_ok);
    let injectivity_ok = faces.iter().all(|f| f.minimizers_injective && f.values_injective);
    let verdict = match witness {
        Some(witness) => SimplicialityVerdict::Failed { witness },
        None if rank_condition_ok || l == 1 => SimplicialityVerdict::SimplicialEvidence,
        None => SimplicialityVerdict::WeaklySimplicialEvidence,
    };
    Ok(SimplicialityReport {
        rank_condition_applicable: applicable,
        rank_condition_ok: rank_condition_ok || l == 1,
        ranks,
        rank_violations,
        face_consistency_ok,
        injectivity_ok,
        faces,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationStudyOptions {
    /// Radius of the Frobenius ball the perturbations are drawn from.
    pub scale: f64,
    pub trials: usize,
    pub seed: u64,
    /// Grid budget for the corank search on each perturbed problem.
    pub survey_budget: usize,
    /// Atlas resolution for the per-trial simpliciality check; 0 skips it.
    pub atlas_resolution: usize,
    pub probe_budget: usize,
}

impl PerturbationStudyOptions {
    pub fn new(scale: f64, trials: usize, seed: u64) -> Self {
        Self {
            scale,
            trials,
            seed,
            survey_budget: 256,
            atlas_resolution: 4,
            probe_budget: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadPerturbation {
    pub trial: usize,
    /// Row-major entries of `pi`.
    pub pi: Vec<f64>,
    /// Pareto point of `f + pi` where `d(f + pi)` has rank at most `l - 2`.
    pub x: Vec<f64>,
    pub corank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationStudy {
    pub trials: usize,
    pub bad_fraction: f64,
    pub bad_samples: Vec<BadPerturbation>,
    /// Counts of per-trial verdicts, keyed by verdict name.
    pub verdict_counts: std::collections::BTreeMap<String, usize>,
    pub dimension_estimate: Option<BoxCountEstimate>,
    pub threshold: SBound,
}

fn verdict_name(v: &SimplicialityVerdict) -> &'static str {
    match v {
        SimplicialityVerdict::SimplicialEvidence => "SIMPLICIAL_EVIDENCE",
        SimplicialityVerdict::WeaklySimplicialEvidence => "WEAKLY_SIMPLICIAL_EVIDENCE",
        SimplicialityVerdict::Failed { .. } => "FAILED",
    }
}

/// Draws random linear perturbations `pi` and looks for Pareto points of
/// `f + pi` where the Jacobian rank drops to `l - 2` or below.
pub fn perturbation_study(f: &MultiObjective, opts: &PerturbationStudyOptions) -> Result<PerturbationStudy> {
    let (m, l) = (f.dim(), f.objectives());
    let threshold = genericity_threshold(ThresholdQuery::Pareto {
        m: m as u32,
        l: l as u32,
    })?;
    let alpha = match f.alpha_hat {
        Some(a) => a,
        None => strong_convexity_estimate(f, 1024)?.alpha_hat,
    };
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::Precondition(format!(
            "perturbation study needs a strongly convex problem, alpha_hat = {alpha}"
        )));
    }
    let base = MultiObjective {
        alpha_hat: Some(alpha),
        ..f.clone()
    };
    let outcomes = par_map(opts.trials, |trial| -> Result<(Option<BadPerturbation>, Option<&'static str>)> {
        let mut rng = substream(opts.seed, trial as u64);
        let pi = LinearPerturbation::sample_ball(l, m, opts.scale, &mut rng);
        let g = base.perturbed(&pi)?;
        let mut bad = None;
        if l >= 2 {
            let survey = corank_survey(&g.map, &g.domain, opts.survey_budget, Some(2))?;
            bad = survey
                .witnesses
                .iter()
                .filter(|w| w.corank >= 2)
                .find(|w| pareto_membership(&g, &w.x, opts.probe_budget))
                .map(|w| BadPerturbation {
                    trial,
                    pi: pi.entries(),
                    x: w.x.clone(),
                    corank: w.corank,
                });
        }
        let verdict = if opts.atlas_resolution > 0 {
            let atlas = build_pareto_atlas(&g, opts.atlas_resolution)?;
            let so = SimplicialityOptions {
                probe_budget: opts.probe_budget,
                ..SimplicialityOptions::default()
            };
            Some(verdict_name(&simpliciality_check(&g, &atlas, &so)?.verdict))
        } else {
            None
        };
        Ok((bad, verdict))
    });
    let mut bad_samples = Vec::new();
    let mut verdict_counts = std::collections::BTreeMap::new();
    for o in outcomes {
        let (bad, verdict) = o?;
        bad_samples.extend(bad);
        if let Some(v) = verdict {
            *verdict_counts.entry(v.to_string()).or_insert(0) += 1;
        }
    }
    let dimension_estimate = if bad_samples.len() >= MIN_POINTS {
        let pts: Vec<Vec<f64>> = bad_samples.iter().map(|b| b.pi.clone()).collect();
        Some(box_count(&pts, &ScaleSpec::default())?)
    } else {
        None
    };
    Ok(PerturbationStudy {
        trials: opts.trials,
        bad_fraction: if opts.trials == 0 {
            0.0
        } else {
            bad_samples.len() as f64 / opts.trials as f64
        },
        bad_samples,
        verdict_counts,
        dimension_estimate,
        threshold,
    })
}
