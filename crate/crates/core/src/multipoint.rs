//! Multi-point maps `f^(d)` and their transversality to the small diagonal.

use serde::{Deserialize, Serialize};

use crate::domain::{per_axis_for_budget, BoxDomain};
use crate::error::{Error, Result};
use crate::exec::{par_map, substream};
use crate::expr::{Expr, ExprMap, Var};
use crate::linalg::{rank_decide, TolPolicy};
use crate::optim::gauss_newton;
use crate::transversality::{defect_at, LevelSetSubmanifold};

/// Relative separation floor (times the box diameter) between tuple points.
pub const SEPARATION_FRACTION: f64 = 1e-4;
/// Image mismatch below which two points count as a double point.
pub const COINCIDENCE_TOL: f64 = 1e-10;

/// `d` pairwise-distinct points of the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPointTuple {
    pub points: Vec<Vec<f64>>,
    pub min_separation: f64,
}

fn distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

fn separated(points: &[Vec<f64>], min_separation: f64) -> bool {
    points
        .iter()
        .enumerate()
        .all(|(i, p)| points[i + 1..].iter().all(|q| distance(p, q) >= min_separation))
}

impl MultiPointTuple {
    pub fn new(points: Vec<Vec<f64>>, min_separation: f64) -> Result<Self> {
        if min_separation <= 0.0 {
            return Err(Error::InvalidInput("separation must be positive".into()));
        }
        if points.len() < 2 {
            return Err(Error::InvalidInput("a tuple needs at least two points".into()));
        }
        let n = points[0].len();
        if points.iter().any(|p| p.len() != n) {
            return Err(Error::InvalidInput("tuple points have different dimensions".into()));
        }
        if !separated(&points, min_separation) {
            return Err(Error::Precondition(format!(
                "tuple points closer than {min_separation}"
            )));
        }
        Ok(Self {
            points,
            min_separation,
        })
    }

    pub fn d(&self) -> usize {
        self.points.len()
    }

    pub fn flattened(&self) -> Vec<f64> {
        self.points.iter().flatten().copied().collect()
    }
}

/// The small diagonal of `(R^l)^d`, cut out by `y_j - y_1 = 0` for `j >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagonalSpec {
    pub l: usize,
    pub d: usize,
    pub codim: usize,
}

impl DiagonalSpec {
    pub fn new(l: usize, d: usize) -> Result<Self> {
        if l == 0 || d < 2 {
            return Err(Error::InvalidInput(format!("diagonal needs l >= 1 and d >= 2, got l = {l}, d = {d}")));
        }
        Ok(Self {
            l,
            d,
            codim: l * (d - 1),
        })
    }

    pub fn submanifold(&self) -> Result<LevelSetSubmanifold> {
        let comps = (1..self.d)
            .flat_map(|j| (0..self.l).map(move |i| Expr::Sub(Box::new(Expr::x(j * self.l + i)), Box::new(Expr::x(i)))))
            .collect();
        LevelSetSubmanifold::new(ExprMap::new(self.l * self.d, 0, comps)?)
    }
}

/// `f^(d)(q_1, ..., q_d) = (f(q_1), ..., f(q_d))` as a map on `R^(n d)`.
pub fn multipoint_map(f: &ExprMap, d: usize) -> Result<ExprMap> {
    if f.arity_a() != 0 {
        return Err(Error::InvalidInput("multipoint maps need a parameter-free map".into()));
    }
    let n = f.arity_x();
    let comps = (0..d)
        .flat_map(|j| {
            f.components().iter().map(move |c| {
                c.substitute(&|v| match v {
                    Var::State(i) => Expr::x(j * n + i),
                    Var::Param(i) => Expr::a(i),
                })
            })
        })
        .collect();
    Ok(ExprMap::new(n * d, 0, comps)?)
}

pub fn multipoint_eval(f: &ExprMap, tuple: &MultiPointTuple) -> Result<Vec<f64>> {
    if !separated(&tuple.points, tuple.min_separation) {
        return Err(Error::Precondition("tuple separation violated".into()));
    }
    let mut out = Vec::with_capacity(tuple.d() * f.output_dim());
    for p in &tuple.points {
        out.extend(f.eval(p, &[])?);
    }
    Ok(out)
}

/// Defect of `f^(d)` against the diagonal at `tuple` (0 off the diagonal).
pub fn diagonal_defect(f: &ExprMap, tuple: &MultiPointTuple) -> Result<usize> {
    let fd = multipoint_map(f, tuple.d())?;
    let z = DiagonalSpec::new(f.output_dim(), tuple.d())?.submanifold()?;
    defect_at(&fd, &z, &tuple.flattened(), &[])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublePoint {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// `||f(p) - f(q)||_inf`.
    pub gap: f64,
}

fn gap_system(f: &ExprMap, z: &[f64]) -> Option<(Vec<f64>, nalgebra::DMatrix<f64>)> {
    let n = f.arity_x();
    let (fp, jp) = f.eval_with_jacobian(&z[..n], &[], crate::expr::Wrt::X).ok()?;
    let (fq, jq) = f.eval_with_jacobian(&z[n..], &[], crate::expr::Wrt::X).ok()?;
    let r = fp.iter().zip(&fq).map(|(a, b)| a - b).collect();
    let mut j = nalgebra::DMatrix::zeros(fp.len(), 2 * n);
    j.view_mut((0, 0), (fp.len(), n)).copy_from(&jp);
    j.view_mut((0, n), (fp.len(), n)).copy_from(&(-jq));
    Some((r, j))
}

/// Pairs `p != q` in `domain` with `f(p) = f(q)`, found from a grid of pairs
/// refined by minimum-norm Gauss-Newton on `f(p) - f(q)`.
pub fn double_point_search(f: &ExprMap, domain: &BoxDomain, budget: usize) -> Result<Vec<DoublePoint>> {
    if f.arity_a() != 0 {
        return Err(Error::InvalidInput("double-point search needs a parameter-free map".into()));
    }
    let n = f.arity_x();
    let sep = SEPARATION_FRACTION * domain.diameter().max(f64::MIN_POSITIVE);
    let pairs = domain.product(domain);
    let per_axis = per_axis_for_budget(budget.max(4), 2 * n);
    let total = pairs.grid_len(per_axis);
    let scores = par_map(total, |i| {
        let z = pairs.grid_point(per_axis, i);
        let ordered = z[..n] < z[n..];
        if !ordered || distance(&z[..n], &z[n..]) < sep {
            return None;
        }
        let (r, _) = gap_system(f, &z)?;
        let g = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        g.is_finite().then_some((g, i))
    });
    let mut scored: Vec<(f64, usize)> = scores.into_iter().flatten().collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let seeds: Vec<usize> = scored.iter().take(64).map(|s| s.1).collect();
    let refined = par_map(seeds.len(), |s| {
        let z0 = pairs.grid_point(per_axis, seeds[s]);
        let sol = gauss_newton(|z| gap_system(f, z), &z0, COINCIDENCE_TOL * 1e-3, 100);
        let z = sol.x;
        let ok = sol.value <= COINCIDENCE_TOL
            && pairs.contains_with_margin(&z, 1e-12)
            && distance(&z[..n], &z[n..]) >= sep;
        ok.then(|| {
            let (p, q) = if z[..n] <= z[n..] {
                (z[..n].to_vec(), z[n..].to_vec())
            } else {
                (z[n..].to_vec(), z[..n].to_vec())
            };
            DoublePoint { p, q, gap: sol.value }
        })
    });
    let mut out: Vec<DoublePoint> = Vec::new();
    for dp in refined.into_iter().flatten() {
        let dup = out
            .iter()
            .any(|o| distance(&o.p, &dp.p) < 1e-6 && distance(&o.q, &dp.q) < 1e-6);
        if !dup {
            out.push(dp);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InjectivityVerdict {
    Injective,
    NotInjective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub verdict: InjectivityVerdict,
    pub double_points: Vec<DoublePoint>,
}

/// Injective on the box unless [`double_point_search`] finds a pair.
pub fn injectivity_check(f: &ExprMap, domain: &BoxDomain, budget: usize) -> Result<InjectivityReport> {
    let double_points = double_point_search(f, domain, budget)?;
    Ok(InjectivityReport {
        verdict: if double_points.is_empty() {
            InjectivityVerdict::Injective
        } else {
            InjectivityVerdict::NotInjective
        },
        double_points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CrossingVerdict {
    NormalCrossings,
    NotNormalCrossings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub d: usize,
    pub tuples: Vec<Vec<Vec<f64>>>,
    pub defects: Vec<usize>,
    pub max_defect: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalCrossingsReport {
    pub verdict: CrossingVerdict,
    pub per_degree: Vec<DegreeReport>,
}

fn combinations(len: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, len: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..len {
            cur.push(i);
            rec(i + 1, len, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, len, k, &mut Vec::new(), &mut out);
    out
}

/// Groups double points into fibres of equal image and tests every
/// `d`-subset of each fibre against the diagonal, for `d = 2..=d_max`.
pub fn normal_crossings_check(f: &ExprMap, domain: &BoxDomain, d_max: usize, budget: usize) -> Result<NormalCrossingsReport> {
    if d_max < 2 {
        return Err(Error::InvalidInput("d_max must be at least 2".into()));
    }
    let sep = SEPARATION_FRACTION * domain.diameter().max(f64::MIN_POSITIVE);
    let doubles = double_point_search(f, domain, budget)?;
    // fibres: lists of distinct preimages sharing one image value
    let mut fibres: Vec<(Vec<f64>, Vec<Vec<f64>>)> = Vec::new();
    for dp in &doubles {
        let image = f.eval(&dp.p, &[])?;
        let slot = fibres
            .iter()
            .position(|(y, _)| y.iter().zip(&image).all(|(a, b)| (a - b).abs() <= 1e-7));
        let idx = match slot {
            Some(i) => i,
            None => {
                fibres.push((image, Vec::new()));
                fibres.len() - 1
            }
        };
        for pt in [&dp.p, &dp.q] {
            if fibres[idx].1.iter().all(|o| distance(o, pt) >= 1e-6) {
                fibres[idx].1.push(pt.clone());
            }
        }
    }
    let mut per_degree = Vec::new();
    let mut clean = true;
    for d in 2..=d_max {
        let mut rep = DegreeReport {
            d,
            tuples: Vec::new(),
            defects: Vec::new(),
            max_defect: 0,
        };
        for (_, pts) in &fibres {
            for combo in combinations(pts.len(), d) {
                let points: Vec<Vec<f64>> = combo.iter().map(|&i| pts[i].clone()).collect();
                let Ok(tuple) = MultiPointTuple::new(points, sep) else { continue };
                let delta = diagonal_defect(f, &tuple)?;
                rep.max_defect = rep.max_defect.max(delta);
                rep.defects.push(delta);
                rep.tuples.push(tuple.points);
            }
        }
        clean &= rep.max_defect == 0;
        per_degree.push(rep);
    }
    Ok(NormalCrossingsReport {
        verdict: if clean {
            CrossingVerdict::NormalCrossings
        } else {
            CrossingVerdict::NotNormalCrossings
        },
        per_degree,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfEstimate {
    pub d_hat: usize,
    /// First tuple (in sample order) of size `d_hat + 1` whose image
    /// differences are dependent.
    pub violating_tuple: Option<Vec<Vec<f64>>>,
    pub tuples_per_degree: usize,
}

/// Sampled estimate of `d_f`: the largest `d` for which every sampled tuple
/// has linearly independent image differences `f(q_i) - f(q_1)`.
pub fn estimate_df(f: &ExprMap, domain: &BoxDomain, tuples_per_degree: usize, seed: u64) -> Result<DfEstimate> {
    if !double_point_search(f, domain, 4096)?.is_empty() {
        return Err(Error::Precondition("map is not injective on the box".into()));
    }
    let m = f.output_dim();
    let sep = SEPARATION_FRACTION * domain.diameter().max(f64::MIN_POSITIVE);
    let mut d_hat = 2;
    for d in 3..=m + 2 {
        let stream_base = (d as u64) << 40;
        let violations = par_map(tuples_per_degree, |i| -> Result<Option<Vec<Vec<f64>>>> {
            let mut rng = substream(seed, stream_base + i as u64);
            let pts = loop {
                let pts: Vec<Vec<f64>> = (0..d).map(|_| domain.sample_uniform(&mut rng)).collect();
                if separated(&pts, sep) {
                    break pts;
                }
            };
            let images: Vec<Vec<f64>> = pts.iter().map(|p| f.eval(p, &[])).collect::<std::result::Result<_, _>>()?;
            let diffs = nalgebra::DMatrix::from_fn(m, d - 1, |r, c| images[c + 1][r] - images[0][r]);
            let rank = rank_decide(&diffs, TolPolicy::default())?.rank;
            Ok((rank < d - 1).then_some(pts))
        });
        let mut first = None;
        for v in violations {
            if let Some(t) = v? {
                first = Some(t);
                break;
            }
        }
        match first {
            Some(t) => {
                return Ok(DfEstimate {
                    d_hat,
                    violating_tuple: Some(t),
                    tuples_per_degree,
                })
            }
            None => d_hat = d,
        }
    }
    Ok(DfEstimate {
        d_hat,
        violating_tuple: None,
        tuples_per_degree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(src: &str, n: usize) -> ExprMap {
        ExprMap::parse(src, n, 0).unwrap()
    }

    fn pair(p: f64, q: f64) -> MultiPointTuple {
        MultiPointTuple::new(vec![vec![p], vec![q]], 1e-6).unwrap()
    }

    #[test]
    fn stacked_images() {
        assert_eq!(multipoint_eval(&ExprMap::identity(1), &pair(0.0, 1.0)).unwrap(), vec![0.0, 1.0]);
        assert_eq!(multipoint_eval(&map("x1^2", 1), &pair(-1.0, 1.0)).unwrap(), vec![1.0, 1.0]);
        let c = multipoint_eval(&map("[2, 3]", 1), &pair(0.2, 0.9)).unwrap();
        assert_eq!(c, vec![2.0, 3.0, 2.0, 3.0]);
        assert!(MultiPointTuple::new(vec![vec![0.0], vec![0.0]], 1e-6).is_err());
    }

    #[test]
    fn diagonal_codim() {
        for l in 1..5 {
            for d in 2..5 {
                let spec = DiagonalSpec::new(l, d).unwrap();
                assert_eq!(spec.codim, l * (d - 1));
                assert_eq!(spec.submanifold().unwrap().codim, spec.codim);
            }
        }
    }

    #[test]
    fn diagonal_defects_by_hand() {
        assert_eq!(diagonal_defect(&map("x1^2", 1), &pair(-1.0, 1.0)).unwrap(), 0);
        assert_eq!(diagonal_defect(&map("7", 1), &pair(0.0, 1.0)).unwrap(), 1);
        assert_eq!(diagonal_defect(&map("[x1^2, x1^2]", 1), &pair(-1.0, 1.0)).unwrap(), 1);
    }

    #[test]
    fn injectivity_of_perturbed_squares() {
        let dom = BoxDomain::cube(1, -2.0, 2.0);
        let bad = ExprMap::parse("[x1^2 + 0.4*x1, x1^2 + 0.4*x1, x1^2 + 0.4*x1]", 1, 0).unwrap();
        let rep = injectivity_check(&bad, &dom, 400).unwrap();
        assert_eq!(rep.verdict, InjectivityVerdict::NotInjective);
        let good = ExprMap::parse("[x1^2 + 0.4*x1, x1^2 - 0.1*x1, x1^2 + 0.9*x1]", 1, 0).unwrap();
        assert_eq!(injectivity_check(&good, &dom, 400).unwrap().verdict, InjectivityVerdict::Injective);
    }

    #[test]
    fn parabola_double_points() {
        let hits = double_point_search(&map("x1^2", 1), &BoxDomain::cube(1, -1.0, 1.0), 400).unwrap();
        assert!(!hits.is_empty());
        for h in &hits {
            assert!((h.p[0] + h.q[0]).abs() < 1e-9);
        }
        let none = double_point_search(&map("[2*x1 + 1]", 1), &BoxDomain::cube(1, -1.0, 1.0), 400).unwrap();
        assert!(none.is_empty());
        let generic = map("[x1^2 + 0.1*x1, x1^2 - 0.3*x1, x1^2 + 0.7*x1]", 1);
        assert!(double_point_search(&generic, &BoxDomain::cube(1, -1.0, 1.0), 400).unwrap().is_empty());
    }

    #[test]
    fn crossings() {
        let r = normal_crossings_check(&map("x1^2", 1), &BoxDomain::cube(1, -1.0, 1.0), 3, 400).unwrap();
        assert_eq!(r.verdict, CrossingVerdict::NormalCrossings);
        assert!(r.per_degree[1].tuples.is_empty());
        let eight = map("[sin(2*x1), sin(x1)]", 1);
        let r = normal_crossings_check(&eight, &BoxDomain::cube(1, -1.0, 5.0), 2, 4096).unwrap();
        assert_eq!(r.verdict, CrossingVerdict::NormalCrossings);
        assert_eq!(r.per_degree[0].tuples.len(), 1);
        let t = &r.per_degree[0].tuples[0];
        assert!(t[0][0].abs() < 1e-9 && (t[1][0] - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn df_of_simple_curves() {
        let line = estimate_df(&map("[x1, 0]", 1), &BoxDomain::cube(1, 0.0, 1.0), 200, 1).unwrap();
        assert_eq!(line.d_hat, 2);
        assert!(line.violating_tuple.is_some());
        let cubic = estimate_df(&map("[x1, x1^2, x1^3]", 1), &BoxDomain::cube(1, 0.0, 1.0), 500, 1).unwrap();
        assert_eq!(cubic.d_hat, 4);
        assert!(estimate_df(&map("x1^2", 1), &BoxDomain::cube(1, -1.0, 1.0), 10, 1).is_err());
    }
}
