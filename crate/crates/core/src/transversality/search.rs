use serde::{Deserialize, Serialize};

use super::{classify_family_point, defect_detail, DefectReport, FamilyProblem};
use crate::domain::{per_axis_for_budget, BoxDomain};
use crate::error::{Error, Result};
use crate::exec::{par_map, substream};
use crate::expr::Wrt;
use crate::linalg::{sigma_min, TolPolicy};
use crate::optim::{fd_jacobian, gauss_newton, nelder_mead};

const GN_ITERS: usize = 60;
const REFINE_STARTS: usize = 8;
const BOX_SLACK: f64 = 1e-9;

/// Lower estimate of `sup delta(F, (x, a), Z)` over the search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupEstimate {
    pub value: usize,
    /// Always true: sampling can only certify a lower bound.
    pub lower_bound: bool,
    pub samples: usize,
    /// Number of evaluated points found on `F^{-1}(Z)`.
    pub on_target: usize,
    pub argmax: Option<DefectReport>,
}

fn fatal(e: &Error) -> bool {
    !matches!(e, Error::Expr(_))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn odd(k: usize) -> usize {
    if k.is_multiple_of(2) {
        k + 1
    } else {
        k
    }
}

/// Joint min-norm projection of `(x, a)` onto `F^{-1}(Z)`.
fn project_joint(p: &FamilyProblem, xa: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = p.state_dim();
    let sol = gauss_newton(
        |z| p.composite_jacobian(&z[..n], &z[n..], Wrt::XA).ok(),
        xa,
        p.target.membership_tol * 1e-3,
        GN_ITERS,
    );
    (sol.value <= p.target.membership_tol).then_some((sol.x, sol.value))
}

/// Samples the product box on an odd tensor grid, projecting every node onto
/// `F^{-1}(Z)`, and returns the largest family defect seen.
pub fn defect_family_sup(p: &FamilyProblem, budget: usize) -> Result<SupEstimate> {
    if budget == 0 {
        return Err(Error::InvalidInput("empty sample set".into()));
    }
    let product = p.x_box.product(&p.a_box);
    let n = p.state_dim();
    let per_axis = odd(per_axis_for_budget(budget, product.dim()));
    let total = product.grid_len(per_axis);
    let results = par_map(total, |i| -> Result<Vec<DefectReport>> {
        let node = product.grid_point(per_axis, i);
        let mut out = Vec::with_capacity(2);
        match classify_family_point(p, &node[..n], &node[n..]) {
            Ok(r) => out.push(r),
            Err(e) if fatal(&e) => return Err(e),
            Err(_) => {}
        }
        if let Some((z, _)) = project_joint(p, &node) {
            if product.contains_with_margin(&z, BOX_SLACK) {
                match classify_family_point(p, &z[..n], &z[n..]) {
                    Ok(r) => out.push(r),
                    Err(e) if fatal(&e) => return Err(e),
                    Err(_) => {}
                }
            }
        }
        Ok(out)
    });
    let mut best: Option<DefectReport> = None;
    let mut samples = 0;
    let mut on_target = 0;
    for r in results {
        for rep in r? {
            samples += 1;
            if rep.classification != super::Classification::NotOnZ {
                on_target += 1;
                if best.as_ref().is_none_or(|b| rep.delta_family > b.delta_family) {
                    best = Some(rep);
                }
            }
        }
    }
    if samples == 0 {
        return Err(Error::InvalidInput("no sample point could be evaluated".into()));
    }
    Ok(SupEstimate {
        value: best.as_ref().map_or(0, |b| b.delta_family),
        lower_bound: true,
        samples,
        on_target,
        argmax: best,
    })
}

/// Start-point strategy for witness searches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WitnessSearch {
    /// 64 nodes per axis up to two state dimensions, 16 up to four, otherwise
    /// 256 random starts.
    #[default]
    Auto,
    Grid { per_axis: usize },
    Multistart { starts: usize, seed: u64 },
}

impl WitnessSearch {
    fn starts(&self, x_box: &BoxDomain) -> Vec<Vec<f64>> {
        let n = x_box.dim();
        match *self {
            WitnessSearch::Auto if n <= 2 => x_box.grid(64),
            WitnessSearch::Auto if n <= 4 => x_box.grid(16),
            WitnessSearch::Auto => WitnessSearch::Multistart { starts: 256, seed: 0 }.starts(x_box),
            WitnessSearch::Grid { per_axis } => x_box.grid(per_axis.max(1)),
            WitnessSearch::Multistart { starts, seed } => {
                let mut rng = substream(seed, u64::MAX);
                (0..starts.max(1)).map(|_| x_box.sample_uniform(&mut rng)).collect()
            }
        }
    }
}

/// A point `x` where the section `F_a` fails to be transverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub a: Vec<f64>,
    pub delta_section: usize,
    pub residual: f64,
}

fn section_witness(p: &FamilyProblem, x: &[f64], a: &[f64], policy: TolPolicy) -> Result<Option<Witness>> {
    match defect_detail(&p.map, &p.target, x, a, Wrt::X, policy) {
        Ok(d) if d.on_target && d.delta > 0 => Ok(Some(Witness {
            x: x.to_vec(),
            a: a.to_vec(),
            delta_section: d.delta,
            residual: d.residual,
        })),
        Ok(_) => Ok(None),
        Err(e) if fatal(&e) => Err(e),
        Err(_) => Ok(None),
    }
}

/// Residual of `h o F` stacked with the smallest singular value of
/// `d(h o F)/dx`; its zeros are rank-drop points on `F^{-1}(Z)`.
fn augmented(p: &FamilyProblem, x: &[f64], a: &[f64]) -> Option<Vec<f64>> {
    let (mut r, j) = p.composite_jacobian(x, a, Wrt::X).ok()?;
    r.push(sigma_min(&j).ok()?);
    Some(r)
}

/// Searches `X_box` for a point where `F_a` is not transverse to `Z`.
///
/// `None` means no witness at this budget, not a proof of transversality.
pub fn find_nontransverse_witness(p: &FamilyProblem, a: &[f64], search: WitnessSearch) -> Result<Option<Witness>> {
    let policy = p.rank_policy;
    let tol = p.target.membership_tol;
    let mut scored = Vec::new();
    for (i, x) in search.starts(&p.x_box).into_iter().enumerate() {
        match p.composite_residual(&x, a) {
            Ok(r) => {
                let norm = inf_norm(&r);
                if norm <= tol {
                    if let Some(w) = section_witness(p, &x, a, policy)? {
                        return Ok(Some(w));
                    }
                }
                if norm.is_finite() {
                    scored.push((norm, i, x));
                }
            }
            Err(e) if fatal(&e) => return Err(e),
            Err(_) => {}
        }
    }
    scored.sort_by(|l, r| l.0.total_cmp(&r.0).then(l.1.cmp(&r.1)));
    let c = p.codim();
    let n = p.state_dim();
    for (_, _, x0) in scored.into_iter().take(REFINE_STARTS) {
        let sol = gauss_newton(|x| p.composite_jacobian(x, a, Wrt::X).ok(), &x0, tol * 1e-3, GN_ITERS);
        if sol.value > tol || !p.x_box.contains_with_margin(&sol.x, BOX_SLACK) {
            continue;
        }
        if let Some(w) = section_witness(p, &sol.x, a, policy)? {
            return Ok(Some(w));
        }
        if c <= n {
            if let Some(w) = rank_drop_search(p, &sol.x, a)? {
                return Ok(Some(w));
            }
        }
    }
    Ok(None)
}

fn rank_drop_search(p: &FamilyProblem, x0: &[f64], a: &[f64]) -> Result<Option<Witness>> {
    let objective = |x: &[f64]| augmented(p, x, a).map_or(f64::INFINITY, |v| v.iter().map(|t| t * t).sum());
    let step = 0.05 * p.x_box.diameter().max(1e-6);
    let nm = nelder_mead(objective, x0, step, 400, 1e-30, Some(&p.x_box));
    let polished = gauss_newton(
        |x| {
            let r = augmented(p, x, a)?;
            let j = fd_jacobian(|y| augmented(p, y, a), x, 1e-7)?;
            Some((r, j))
        },
        &nm.x,
        1e-13,
        GN_ITERS,
    );
    if !p.x_box.contains_with_margin(&polished.x, BOX_SLACK) {
        return Ok(None);
    }
    section_witness(p, &polished.x, a, p.rank_policy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaOptions {
    pub budget: usize,
    pub seed: u64,
    /// Largest parameter move accepted when projecting a sample onto the bad
    /// set; defaults to 5% of the parameter box diameter.
    pub capture_radius: Option<f64>,
    /// Project samples onto the bad set instead of testing them as drawn.
    pub refine: bool,
    pub search: WitnessSearch,
}

impl SigmaOptions {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            seed,
            capture_radius: None,
            refine: true,
            search: WitnessSearch::Auto,
        }
    }
}

/// Detected parameters of the bad set, in sample order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaCloud {
    pub points: Vec<Vec<f64>>,
    /// The state witness belonging to each point.
    pub witnesses: Vec<Vec<f64>>,
    pub budget: usize,
    pub capture_radius: f64,
}

/// Draws parameters uniformly from `A_box` and collects those (possibly after
/// projection onto the bad set) that admit a non-transverse witness.
pub fn sample_sigma(p: &FamilyProblem, opts: &SigmaOptions) -> Result<SigmaCloud> {
    let capture = opts.capture_radius.unwrap_or(0.05 * p.a_box.diameter());
    let hits = par_map(opts.budget, |i| -> Result<Option<Witness>> {
        let mut rng = substream(opts.seed, i as u64);
        let a0 = p.a_box.sample_uniform(&mut rng);
        if let Some(w) = find_nontransverse_witness(p, &a0, opts.search)? {
            return Ok(Some(w));
        }
        if !opts.refine {
            return Ok(None);
        }
        project_sample(p, &a0, capture, opts.search)
    });
    let mut cloud = SigmaCloud {
        points: Vec::new(),
        witnesses: Vec::new(),
        budget: opts.budget,
        capture_radius: capture,
    };
    for h in hits {
        if let Some(w) = h? {
            cloud.points.push(w.a);
            cloud.witnesses.push(w.x);
        }
    }
    Ok(cloud)
}

fn project_sample(p: &FamilyProblem, a0: &[f64], capture: f64, search: WitnessSearch) -> Result<Option<Witness>> {
    let n = p.state_dim();
    let c = p.codim();
    let mut scored: Vec<(f64, usize, Vec<f64>)> = search
        .starts(&p.x_box)
        .into_iter()
        .enumerate()
        .filter_map(|(i, x)| p.composite_residual(&x, a0).ok().map(|r| (inf_norm(&r), i, x)))
        .filter(|s| s.0.is_finite())
        .collect();
    scored.sort_by(|l, r| l.0.total_cmp(&r.0).then(l.1.cmp(&r.1)));
    let accept = |z: &[f64]| {
        let moved = z[n..].iter().zip(a0).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        moved <= capture
            && p.a_box.contains_with_margin(&z[n..], 0.0)
            && p.x_box.contains_with_margin(&z[..n], BOX_SLACK)
    };
    for (_, _, x0) in scored.into_iter().take(REFINE_STARTS / 2) {
        let start: Vec<f64> = x0.iter().chain(a0).copied().collect();
        let Some((z, _)) = project_joint(p, &start) else { continue };
        if !accept(&z) {
            continue;
        }
        if let Some(w) = section_witness(p, &z[..n], &z[n..], p.rank_policy)? {
            return Ok(Some(w));
        }
        if c <= n {
            let sys = |v: &[f64]| augmented(p, &v[..n], &v[n..]);
            let sol = gauss_newton(
                |v| Some((sys(v)?, fd_jacobian(sys, v, 1e-7)?)),
                &z,
                1e-13,
                GN_ITERS,
            );
            if accept(&sol.x) {
                if let Some(w) = section_witness(p, &sol.x[..n], &sol.x[n..], p.rank_policy)? {
                    return Ok(Some(w));
                }
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub trials: usize,
    pub hit_count: usize,
    pub hit_fraction: f64,
    pub hits: Vec<Vec<f64>>,
}

/// Counts uniformly drawn parameters that admit a witness exactly as drawn.
pub fn measure_zero_probe(p: &FamilyProblem, trials: usize, seed: u64, search: WitnessSearch) -> Result<ProbeReport> {
    if trials == 0 {
        return Err(Error::InvalidInput("at least one trial is required".into()));
    }
    let found = par_map(trials, |i| -> Result<Option<Vec<f64>>> {
        let mut rng = substream(seed, i as u64);
        let a = p.a_box.sample_uniform(&mut rng);
        Ok(find_nontransverse_witness(p, &a, search)?.map(|_| a))
    });
    let mut hits = Vec::new();
    for f in found {
        if let Some(a) = f? {
            hits.push(a);
        }
    }
    Ok(ProbeReport {
        trials,
        hit_count: hits.len(),
        hit_fraction: hits.len() as f64 / trials as f64,
        hits,
    })
}
