//! Box-counting (Minkowski) dimension of point clouds, used as a computable
//! stand-in for Hausdorff dimension of sampled bad sets.

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::par_map;
use crate::transversality::{
    defect_family_sup, delta_star, genericity_threshold, sample_sigma, FamilyProblem, SBound, SigmaOptions,
    Smoothness, ThresholdQuery,
};

pub use crate::transversality::{measure_zero_probe, ProbeReport};

pub const MIN_POINTS: usize = 100;

/// Geometric ladder of box sizes relative to the cloud's bounding-box diameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpec {
    pub levels: usize,
    /// Coarsest box size is `diameter / coarse_divisor`.
    pub coarse_divisor: f64,
    /// Finest box size is `diameter / fine_divisor`.
    pub fine_divisor: f64,
    /// Levels dropped from each end of the ladder before fitting.
    pub trim: usize,
    /// Levels whose count exceeds this fraction of the cloud size are
    /// dropped as saturated.
    pub saturation_fraction: f64,
}

impl Default for ScaleSpec {
    fn default() -> Self {
        Self {
            levels: 12,
            coarse_divisor: 4.0,
            fine_divisor: 16384.0,
            trim: 1,
            saturation_fraction: 0.2,
        }
    }
}

impl ScaleSpec {
    pub fn epsilons(&self, diameter: f64) -> Vec<f64> {
        let hi = diameter / self.coarse_divisor;
        let lo = diameter / self.fine_divisor;
        if self.levels <= 1 {
            return vec![hi];
        }
        (0..self.levels)
            .map(|i| {
                let t = i as f64 / (self.levels - 1) as f64;
                hi * (lo / hi).powf(t)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub epsilon: f64,
    pub count: usize,
    pub used_in_fit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCountEstimate {
    /// Always "box-counting": the value estimates Minkowski dimension,
    /// which bounds Hausdorff dimension from above.
    pub method: String,
    pub dimension: f64,
    /// Strictly decreasing in `epsilon`.
    pub scales: Vec<ScalePoint>,
    pub fit_r2: f64,
    pub ambient_dim: usize,
    pub num_points: usize,
}

fn occupied(points: &[Vec<f64>], lo: &[f64], eps: f64) -> usize {
    let mut seen: HashSet<Vec<i64>> = HashSet::with_capacity(points.len());
    for p in points {
        seen.insert(p.iter().zip(lo).map(|(x, l)| ((x - l) / eps).floor() as i64).collect());
    }
    seen.len()
}

/// Slope and coefficient of determination of the least-squares line.
fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return (0.0, 1.0);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, r2)
}

pub fn box_count(points: &[Vec<f64>], spec: &ScaleSpec) -> Result<BoxCountEstimate> {
    if points.len() < MIN_POINTS {
        return Err(Error::InvalidInput(format!(
            "box counting needs at least {MIN_POINTS} points, got {}",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidInput("points must be finite and of equal dimension".into()));
    }
    let lo: Vec<f64> = (0..dim).map(|i| points.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..dim).map(|i| points.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let diameter = lo.iter().zip(&hi).map(|(l, h)| (h - l).powi(2)).sum::<f64>().sqrt();
    let method = "box-counting".to_string();
    if diameter == 0.0 {
        return Ok(BoxCountEstimate {
            method,
            dimension: 0.0,
            scales: Vec::new(),
            fit_r2: 1.0,
            ambient_dim: dim,
            num_points: points.len(),
        });
    }
    let eps = spec.epsilons(diameter);
    let counts = par_map(eps.len(), |i| occupied(points, &lo, eps[i]));
    let cap = spec.saturation_fraction * points.len() as f64;
    let last = eps.len().saturating_sub(spec.trim);
    let scales: Vec<ScalePoint> = eps
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(i, (&epsilon, &count))| ScalePoint {
            epsilon,
            count,
            used_in_fit: i >= spec.trim && i < last && (count as f64) <= cap,
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = scales
        .iter()
        .filter(|s| s.used_in_fit)
        .map(|s| ((1.0 / s.epsilon).ln(), (s.count as f64).ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "only {} unsaturated scales left for the fit; sample more points",
            xs.len()
        )));
    }
    let (slope, fit_r2) = fit_line(&xs, &ys);
    Ok(BoxCountEstimate {
        method,
        dimension: slope.max(0.0),
        scales,
        fit_r2,
        ambient_dim: dim,
        num_points: points.len(),
    })
}

/// `(epsilon, count)` rows with a header line.
pub fn write_scales_csv<W: Write>(estimate: &BoxCountEstimate, mut out: W) -> std::io::Result<()> {
    writeln!(out, "epsilon,count")?;
    for s in &estimate.scales {
        writeln!(out, "{:e},{}", s.epsilon, s.count)?;
    }
    Ok(())
}

/// One row per point, columns `{prefix}_1..{prefix}_p`.
pub fn write_points_csv<W: Write>(prefix: &str, dim: usize, points: &[Vec<f64>], mut out: W) -> std::io::Result<()> {
    let header: Vec<String> = (1..=dim).map(|i| format!("{prefix}_{i}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for p in points {
        let row: Vec<String> = p.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Left endpoints of the `2^depth` intervals of the middle-thirds
/// construction at the given depth.
pub fn cantor_sample(depth: u32) -> Vec<Vec<f64>> {
    let mut pts = vec![0.0f64];
    let mut len = 1.0f64;
    for _ in 0..depth {
        len /= 3.0;
        pts = pts.iter().flat_map(|&p| [p, p + 2.0 * len]).collect();
    }
    pts.into_iter().map(|p| vec![p]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaDimensionReport {
    /// `None` when too few bad parameters were found to fit a dimension.
    pub estimate: Option<BoxCountEstimate>,
    pub sigma_points: usize,
    pub dim_a: usize,
    /// Lower estimate of the family defect used for `delta_star`.
    pub sup_defect: usize,
    pub delta_star: i64,
    pub threshold: SBound,
    /// Whether the fitted dimension is admitted by the threshold within the
    /// 0.1 fit slack, i.e. does not exceed it.
    pub consistent_with_threshold: Option<bool>,
}

/// Samples the bad set, fits its box-counting dimension, and attaches the
/// exponent bound for the family's `(dim A, delta_star, r)`.
pub fn sigma_dimension_report(
    p: &FamilyProblem,
    sigma: &SigmaOptions,
    sup_budget: usize,
    scales: &ScaleSpec,
    r: Smoothness,
) -> Result<SigmaDimensionReport> {
    let sup = defect_family_sup(p, sup_budget)?;
    let ds = delta_star(p, sup.value);
    let dim_a = p.param_dim();
    let threshold = genericity_threshold(ThresholdQuery::Main1 {
        dim_a: dim_a as u32,
        delta_star: ds,
        r,
    })?;
    let cloud = sample_sigma(p, sigma)?;
    let estimate = if cloud.points.len() >= MIN_POINTS {
        Some(box_count(&cloud.points, scales)?)
    } else {
        None
    };
    let consistent_with_threshold = estimate.as_ref().map(|e| {
        let t = threshold.as_f64();
        e.dimension <= t + 0.1
    });
    Ok(SigmaDimensionReport {
        estimate,
        sigma_points: cloud.points.len(),
        dim_a,
        sup_defect: sup.value,
        delta_star: ds,
        threshold,
        consistent_with_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::substream;
    use rand::Rng;

    #[test]
    fn cantor_dimension() {
        let est = box_count(&cantor_sample(12), &ScaleSpec::default()).unwrap();
        let target = 2f64.ln() / 3f64.ln();
        assert!((est.dimension - target).abs() < 0.05, "{}", est.dimension);
    }

    #[test]
    fn segment_dimension() {
        let mut rng = substream(9, 0);
        let pts: Vec<Vec<f64>> = (0..10_000)
            .map(|_| {
                let t: f64 = rng.random();
                vec![0.3 + 2.0 * t, -1.0 + t]
            })
            .collect();
        let est = box_count(&pts, &ScaleSpec::default()).unwrap();
        assert!((est.dimension - 1.0).abs() < 0.05, "{}", est.dimension);
    }

    #[test]
    fn repeated_point_is_zero_dimensional() {
        let pts = vec![vec![0.5, 0.5]; 200];
        let est = box_count(&pts, &ScaleSpec::default()).unwrap();
        assert_eq!(est.dimension, 0.0);
        assert_eq!(est.fit_r2, 1.0);
    }

    #[test]
    fn too_few_points() {
        assert!(box_count(&vec![vec![0.0]; 10], &ScaleSpec::default()).is_err());
    }

    #[test]
    fn scales_decrease() {
        let est = box_count(&cantor_sample(8), &ScaleSpec::default()).unwrap();
        assert!(est.scales.windows(2).all(|w| w[0].epsilon > w[1].epsilon));
        let mut buf = Vec::new();
        write_scales_csv(&est, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epsilon,count\n"));
        assert_eq!(text.lines().count(), 13);
    }
}
